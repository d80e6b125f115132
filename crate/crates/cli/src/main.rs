fn main() {
    std::process::exit(isoperi_cli::main_with_args(std::env::args_os()));
}
