fn main() {
    // LAPACK symbols (zheev/zgeev/zgesv/zgemm) come from the system OpenBLAS,
    // which bundles the full LAPACK on the platforms we target.
    println!("cargo:rustc-link-lib=dylib=openblas");
    println!("cargo:rerun-if-changed=build.rs");
}
