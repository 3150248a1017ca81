fn main() {
    std::process::exit(nonrev_kinetic::cli::run(std::env::args_os()));
}
