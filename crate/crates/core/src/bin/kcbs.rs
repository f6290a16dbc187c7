fn main() {
    std::process::exit(kcbs_selftest::cli::main_with_args(std::env::args_os()));
}
