//! Published full-scale parameter choices, bundled as a data file.
//!
//! Every row pairs an edge density `p` with the `(s, ell)` used at
//! production scale `L = s + 2*ell = 8000`. The margins were calibrated so
//! that the long-connection event `F` occurs with probability near 0.001.

use std::sync::OnceLock;

use crate::lattice::LatticeKind;

/// One row of the bundled parameter table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppendixRow {
    pub lattice: LatticeKind,
    pub p: f64,
    pub s: u32,
    pub ell: u32,
}

const APPENDIX_CSV: &str = include_str!("../data/appendix_params.csv");

static TABLE: OnceLock<Vec<AppendixRow>> = OnceLock::new();

/// The full bundled table, in file order.
pub fn appendix_table() -> &'static [AppendixRow] {
    TABLE.get_or_init(|| {
        APPENDIX_CSV
            .lines()
            .skip(1)
            .filter(|line| !line.trim().is_empty())
            .map(|line| {
                let mut cells = line.split(',');
                let lattice = LatticeKind::parse(cells.next().expect("lattice cell"))
                    .expect("lattice label in bundled table");
                let p = cells
                    .next()
                    .expect("p cell")
                    .parse()
                    .expect("p value in bundled table");
                let s = cells
                    .next()
                    .expect("s cell")
                    .parse()
                    .expect("s value in bundled table");
                let ell = cells
                    .next()
                    .expect("ell cell")
                    .parse()
                    .expect("ell value in bundled table");
                AppendixRow { lattice, p, s, ell }
            })
            .collect()
    })
}

/// Looks up the published `(s, ell)` for a lattice and edge density. `p`
/// must match a table value exactly as parsed from its decimal literal.
pub fn appendix_parameters(lattice: LatticeKind, p: f64) -> Option<(u32, u32)> {
    appendix_table()
        .iter()
        .find(|row| row.lattice == lattice && row.p == p)
        .map(|row| (row.s, row.ell))
}
