fn main() -> std::process::ExitCode {
    std::process::ExitCode::from(orderid::cli::main_with_args(std::env::args_os()))
}
