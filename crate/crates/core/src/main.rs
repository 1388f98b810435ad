fn main() -> std::process::ExitCode {
    treu_eval::cli::main_with(std::env::args_os())
}
