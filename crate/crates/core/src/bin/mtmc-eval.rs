fn main() {
    std::process::exit(mtmc_eval::cli::main());
}
