fn main() {
    std::process::exit(gp_pde_bench::cli::main_with_args(std::env::args_os()));
}
