fn main() {
    std::process::exit(simvi::cli::parse_and_dispatch(std::env::args_os()));
}
