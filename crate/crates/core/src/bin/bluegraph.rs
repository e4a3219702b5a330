fn main() {
    std::process::exit(bluegraph::cli::run_cli(std::env::args_os()));
}
