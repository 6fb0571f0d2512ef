fn main() {
    std::process::exit(kpolar_cli::main_with_args(std::env::args_os()));
}
