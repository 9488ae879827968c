fn main() {
    std::process::exit(satprov::bench::cli::run(std::env::args_os()));
}
