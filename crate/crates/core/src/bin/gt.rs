fn main() {
    std::process::exit(growth_target::cli::run());
}
