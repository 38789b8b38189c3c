use std::path::PathBuf;

use plate_stokes::cli::config::{Case, ExportFlags, RunConfig};
use plate_stokes::cli::vtk;
use plate_stokes::linalg::{pcg, DenseMatrix, SparseMatrix};
use plate_stokes::mesh::{Mesh2, Mesh3};
use plate_stokes::plate::{apply_functionals, ArgyrisElement, ArgyrisSpace, PlateField, LOCAL_DOFS};
use plate_stokes::stokes::FluidBackend;
use plate_stokes::verification::{observed_rate, H2Seminorm};
use proptest::prelude::*;

fn triangle() -> impl Strategy<Value = [[f64; 2]; 3]> {
    prop::array::uniform3(prop::array::uniform2(-3.0..3.0f64)).prop_filter("well shaped", |v| {
        let area = 0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]));
        let longest = (0..3)
            .map(|k| {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .fold(0.0, f64::max);
        area.abs() > 0.1 * longest * longest
    })
}

fn normals(v: &[[f64; 2]; 3], flips: [bool; 3]) -> [[f64; 2]; 3] {
    std::array::from_fn(|k| {
        let (a, b) = (v[(k + 1) % 3], v[(k + 2) % 3]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let s = if flips[k] { -1.0 } else { 1.0 };
        [s * (b[1] - a[1]) / len, -s * (b[0] - a[0]) / len]
    })
}

/// Value, gradient and Hessian of `Σ c_ij x^i y^j`, `i + j ≤ 5`.
fn quintic_jet(c: &[f64], p: [f64; 2]) -> [f64; 6] {
    let pw = |b: f64, k: i32| if k < 0 { 0.0 } else { b.powi(k) };
    let [x, y] = p;
    let mut jet = [0.0; 6];
    let mut m = 0;
    for total in 0..=5i32 {
        for j in 0..=total {
            let i = total - j;
            let (fi, fj, k) = (i as f64, j as f64, c[m]);
            jet[0] += k * pw(x, i) * pw(y, j);
            jet[1] += k * fi * pw(x, i - 1) * pw(y, j);
            jet[2] += k * fj * pw(x, i) * pw(y, j - 1);
            jet[3] += k * fi * (fi - 1.0) * pw(x, i - 2) * pw(y, j);
            jet[4] += k * fi * fj * pw(x, i - 1) * pw(y, j - 1);
            jet[5] += k * fj * (fj - 1.0) * pw(x, i) * pw(y, j - 2);
            m += 1;
        }
    }
    jet
}

fn config() -> impl Strategy<Value = RunConfig> {
    let levels = prop::collection::btree_set(1usize..40, 1..5).prop_map(|s| s.into_iter().collect::<Vec<_>>());
    (
        (prop::bool::ANY, levels.clone(), prop::option::of(levels), 1usize..40),
        (1e-3..1e3f64, 0.0..10.0f64, prop::bool::ANY, 1usize..20, 1usize..5, 1usize..10),
        (1e-15..1e-3f64, 0usize..3, "[a-z0-9_/]{1,12}", prop::array::uniform3(prop::bool::ANY), 2usize..300),
        prop::bool::ANY,
    )
        .prop_map(|(a, b, c, deep)| RunConfig {
            case: if a.0 { Case::PaperRho } else { Case::PaperRho0 },
            levels: a.1,
            fluid_levels: a.2,
            level: a.3,
            lambda: b.0,
            rho: b.1,
            h2_seminorm: if b.2 { H2Seminorm::Laplacian } else { H2Seminorm::Hessian },
            plate_error_degree: b.3,
            plate_error_subdivisions: b.4,
            fluid_error_degree: b.5,
            tolerance: c.0,
            backend: [FluidBackend::Auto, FluidBackend::Direct, FluidBackend::SchurCg][c.1],
            output_dir: PathBuf::from(c.2),
            export: ExportFlags {
                csv: c.3[0],
                vtk: c.3[1],
                field_grid: c.3[2],
            },
            grid_resolution: c.4,
            deep,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn argyris_functionals_are_dual_to_basis(v in triangle(), flips in prop::array::uniform3(prop::bool::ANY)) {
        let n = normals(&v, flips);
        let e = ArgyrisElement::new(0, v, n).unwrap();
        for j in 0..LOCAL_DOFS {
            let dofs = apply_functionals(v, n, |p| e.basis(p)[j]);
            for (i, d) in dofs.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((d - want).abs() < 1e-9, "functional {} on basis {}: {}", i, j, d);
            }
        }
    }

    #[test]
    fn argyris_reproduces_quintics(
        v in triangle(),
        c in prop::collection::vec(-1.0..1.0f64, 21),
        w in prop::array::uniform2(0.0..0.5f64),
    ) {
        let n = normals(&v, [false; 3]);
        let e = ArgyrisElement::new(0, v, n).unwrap();
        let dofs = apply_functionals(v, n, |p| quintic_jet(&c, p));
        let p = [
            v[0][0] + w[0] * (v[1][0] - v[0][0]) + w[1] * (v[2][0] - v[0][0]),
            v[0][1] + w[0] * (v[1][1] - v[0][1]) + w[1] * (v[2][1] - v[0][1]),
        ];
        let got = e.combine(&dofs, p);
        let want = quintic_jet(&c, p);
        let scale = want.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for d in 0..6 {
            prop_assert!((got[d] - want[d]).abs() <= 1e-9 * scale, "{}: {} vs {}", d, got[d], want[d]);
        }
    }

    #[test]
    fn pcg_solves_random_spd(
        n in 2usize..24,
        seed in prop::collection::vec(-1.0..1.0f64, 24 * 24),
        rhs in prop::collection::vec(-1.0..1.0f64, 24),
    ) {
        let q = DenseMatrix::from_fn(n, n, |i, j| seed[i * 24 + j]);
        let mut a = q.transpose_mul(&q);
        a.add_scaled(1.0, &DenseMatrix::from_fn(n, n, |i, j| if i == j { 0.5 } else { 0.0 }));
        let b = &rhs[..n];
        let diag: Vec<f64> = (0..n).map(|i| a.row(i)[i]).collect();
        let res = pcg(
            |v| Ok(a.mul_vec(v)),
            |r| Ok(r.iter().zip(&diag).map(|(x, d)| x / d).collect()),
            b,
            1e-12,
            10 * n,
            "property",
        )
        .unwrap();
        let r: f64 = a.mul_vec(&res.x).iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(r <= 1e-10 * nb.max(1e-300));
    }

    #[test]
    fn sparse_transpose_is_adjoint(
        entries in prop::collection::vec((0usize..7, 0usize..5, -2.0..2.0f64), 0..30),
        x in prop::collection::vec(-1.0..1.0f64, 5),
        y in prop::collection::vec(-1.0..1.0f64, 7),
    ) {
        let mut builder = plate_stokes::linalg::TripletBuilder::new(7, 5);
        for &(r, c, v) in &entries {
            builder.add(r, c, v);
        }
        let a: SparseMatrix = builder.build();
        let lhs: f64 = a.mul_vec(&x).iter().zip(&y).map(|(p, q)| p * q).sum();
        let rhs: f64 = a.mul_transpose_vec(&y).iter().zip(&x).map(|(p, q)| p * q).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn config_text_round_trips(cfg in config()) {
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn observed_rate_recovers_power_laws(
        c in 1e-8..1e3f64,
        r in 0.5..6.0f64,
        h0 in 0.05..1.0f64,
        ratio in 1.5..4.0f64,
        k in 1e-6..1e6f64,
    ) {
        let h1 = h0 / ratio;
        let e = |h: f64| c * h.powf(r);
        prop_assert!((observed_rate(e(h0), e(h1), h0, h1) - r).abs() < 1e-9);
        // Scaling both errors leaves the rate unchanged.
        let scaled = observed_rate(k * e(h0), k * e(h1), h0, h1);
        prop_assert!((scaled - r).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn mass_form_is_monotone_in_rho(
        coeffs in prop::collection::vec(-1.0..1.0f64, 64),
        rho0 in 0.0..2.0f64,
        step in 0.0..2.0f64,
    ) {
        let space = ArgyrisSpace::build(2).unwrap();
        let n = space.n_dofs();
        let w: Vec<f64> = (0..n).map(|i| coeffs[i % coeffs.len()] * (1.0 + i as f64 / n as f64)).collect();
        let w = space.extend_vector(&space.restrict_vector(&w));
        let m0 = space.assemble_mass_rho(rho0).unwrap().bilinear(&w, &w);
        let m1 = space.assemble_mass_rho(rho0 + step).unwrap().bilinear(&w, &w);
        prop_assert!(m0 >= 0.0);
        prop_assert!(m1 >= m0 - 1e-12 * m0.abs());
    }

    #[test]
    fn plate_integral_is_linear(
        a in prop::collection::vec(-1.0..1.0f64, 64),
        b in prop::collection::vec(-1.0..1.0f64, 64),
        s in -3.0..3.0f64,
        t in -3.0..3.0f64,
    ) {
        let space = ArgyrisSpace::build(2).unwrap();
        let n = space.n_free();
        let f = PlateField::from_free(space.clone(), &(0..n).map(|i| a[i % 64]).collect::<Vec<_>>()).unwrap();
        let g = PlateField::from_free(space.clone(), &(0..n).map(|i| b[(i * 7) % 64]).collect::<Vec<_>>()).unwrap();
        let combo = f.axpby(s, &g, t).unwrap();
        let lhs = combo.integral().unwrap();
        let rhs = s * f.integral().unwrap() + t * g.integral().unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn mesh_exports_validate(level in 1usize..6, corrupt in 0usize..3) {
        let plate = vtk::plate_mesh(&Mesh2::new(level).unwrap()).unwrap();
        let summary = vtk::validate(&plate).unwrap();
        prop_assert_eq!(summary.cells, 4 * level * level);
        prop_assert_eq!(summary.cell_types.get(&vtk::VTK_TRIANGLE).copied(), Some(4 * level * level));
        let fluid = vtk::fluid_mesh(&Mesh3::new(level).unwrap()).unwrap();
        let summary = vtk::validate(&fluid).unwrap();
        prop_assert_eq!(summary.cells, 24 * level * level * level);

        let broken = match corrupt {
            0 => plate.replacen("POINTS", "POINTZ", 1),
            1 => plate.replacen(&format!("CELL_TYPES {}", 4 * level * level), &format!("CELL_TYPES {}", 4 * level * level + 1), 1),
            _ => plate[..plate.len() / 2].to_string(),
        };
        prop_assert!(vtk::validate(&broken).is_err());
    }
}
