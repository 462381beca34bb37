fn main() {
    std::process::exit(cevpolar::cli::run(std::env::args_os()));
}
