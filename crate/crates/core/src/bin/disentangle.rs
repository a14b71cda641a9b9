fn main() {
    std::process::exit(disentangle::cli::main());
}
