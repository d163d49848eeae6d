fn main() {
    std::process::exit(broyden_cli::run_cli(std::env::args_os()));
}
