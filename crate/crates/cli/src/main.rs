fn main() {
    std::process::exit(fsreg_cli::run_from_args(std::env::args_os()));
}
