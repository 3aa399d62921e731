fn main() {
    std::process::exit(uncagg::cli::run(std::env::args_os()));
}
