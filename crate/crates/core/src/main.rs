fn main() {
    std::process::exit(warpkit::io::cli::run(std::env::args_os()));
}
