fn main() {
    std::process::exit(nonprob::cli::run(std::env::args_os()));
}
