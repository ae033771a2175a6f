fn main() {
    std::process::exit(eikonal_fem::cli::main_with_args(std::env::args_os()));
}
