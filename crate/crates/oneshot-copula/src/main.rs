fn main() {
    std::process::exit(oneshot_copula::cli::run());
}
