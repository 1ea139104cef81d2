fn main() {
    std::process::exit(macromdp::cli::main());
}
