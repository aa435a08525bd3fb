//! Benchmark fixtures shared by the criterion benches.

use helpkit_core::report::bundled_table;
use helpkit_core::CharTable;

/// A bundled table; panics on an unknown name.
pub fn table(name: &str) -> CharTable {
    bundled_table(name).expect("bundled table")
}
