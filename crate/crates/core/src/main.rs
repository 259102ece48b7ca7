fn main() {
    std::process::exit(popbias::cli::main());
}
