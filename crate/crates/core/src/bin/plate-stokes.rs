fn main() -> std::process::ExitCode {
    plate_stokes::cli::main_with_args(std::env::args_os())
}
