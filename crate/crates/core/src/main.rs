fn main() {
    std::process::exit(maxplus_dre::cli::run(std::env::args_os()));
}
