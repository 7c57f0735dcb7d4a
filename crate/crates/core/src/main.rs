fn main() -> std::process::ExitCode {
    landau_lab::cli::main_with_args(std::env::args_os())
}
