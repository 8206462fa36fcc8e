fn main() {
    std::process::exit(rotsync::cli::run(std::env::args_os()));
}
