fn main() {
    std::process::exit(helmholtzian_cli::main_with_args(std::env::args_os()));
}
