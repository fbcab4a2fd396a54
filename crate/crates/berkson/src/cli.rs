//! Command-line interface (placeholder during bootstrap).
pub fn run() -> i32 {
    0
}
