fn main() {
    std::process::exit(hankel_cpd::cli::run());
}
