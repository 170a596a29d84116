fn main() {
    std::process::exit(hyperorbit::cli::main_with(std::env::args()));
}
