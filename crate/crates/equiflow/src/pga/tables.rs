//! Frozen structure constants of G(3,0,1) in the fixed basis ordering
//!
//!   index:  0    1    2    3    4    5     6     7     8     9     10    11     12     13     14     15
//!   blade:  1    e0   e1   e2   e3   e01   e02   e03   e12   e13   e23   e012   e013   e023   e123   e0123
//!
//! with e0*e0 = 0 and ei*ei = +1 for i in {1,2,3}. Product tables are stored as
//! (left, right, out, sign) entries; absent pairs multiply to zero. The join is
//! right_complement(right_complement(a) ^ right_complement(b)) with the right
//! complement defined by e_I ^ e_Ic = +e0123; the whole composition is fused
//! into `JOIN_PRODUCT`. A human-readable rendering of these tables lives in
//! docs/algebra_tables.md and can be regenerated with the
//! `print_algebra_tables` example.

/// Number of coefficients of a multivector.
pub const DIM: usize = 16;

/// Blade names in storage order.
pub const BLADE_NAMES: [&str; DIM] = [
    "1", "e0", "e1", "e2", "e3", "e01", "e02", "e03", "e12", "e13", "e23", "e012", "e013",
    "e023", "e123", "e0123",
];

/// Grade of each basis blade.
pub const GRADE: [usize; DIM] = [0, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 3, 3, 3, 3, 4];

/// Coefficient ranges of grades 0..=4.
pub const GRADE_RANGES: [(usize, usize); 5] = [(0, 1), (1, 5), (5, 11), (11, 15), (15, 16)];

/// Reversion sign per blade: (-1)^(k(k-1)/2) for grade k.
pub const REVERSE_SIGN: [i8; DIM] = [1, 1, 1, 1, 1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, 1];

/// Grade involution sign per blade: (-1)^k.
pub const INVOLUTION_SIGN: [i8; DIM] = [1, -1, -1, -1, -1, 1, 1, 1, 1, 1, 1, -1, -1, -1, -1, 1];

/// Blades that enter the invariant inner product (those not containing e0).
pub const INNER_MASK: [bool; DIM] = [
    true, false, true, true, true, false, false, false, true, true, true, false, false, false,
    true, false,
];

/// Indices of the 8 blades in `INNER_MASK`.
pub const INNER_INDICES: [usize; 8] = [0, 2, 3, 4, 8, 9, 10, 14];

/// Cayley table of the geometric product: out[k] += s * a[i] * b[j].
pub const GEOMETRIC_PRODUCT: [(u8, u8, u8, i8); 192] = [
    (0, 0, 0, 1), (0, 1, 1, 1), (0, 2, 2, 1), (0, 3, 3, 1), (0, 4, 4, 1), (0, 5, 5, 1),
    (0, 6, 6, 1), (0, 7, 7, 1), (0, 8, 8, 1), (0, 9, 9, 1), (0, 10, 10, 1), (0, 11, 11, 1),
    (0, 12, 12, 1), (0, 13, 13, 1), (0, 14, 14, 1), (0, 15, 15, 1),
    (1, 0, 1, 1), (1, 2, 5, 1), (1, 3, 6, 1), (1, 4, 7, 1), (1, 8, 11, 1), (1, 9, 12, 1),
    (1, 10, 13, 1), (1, 14, 15, 1),
    (2, 0, 2, 1), (2, 1, 5, -1), (2, 2, 0, 1), (2, 3, 8, 1), (2, 4, 9, 1), (2, 5, 1, -1),
    (2, 6, 11, -1), (2, 7, 12, -1), (2, 8, 3, 1), (2, 9, 4, 1), (2, 10, 14, 1), (2, 11, 6, -1),
    (2, 12, 7, -1), (2, 13, 15, -1), (2, 14, 10, 1), (2, 15, 13, -1),
    (3, 0, 3, 1), (3, 1, 6, -1), (3, 2, 8, -1), (3, 3, 0, 1), (3, 4, 10, 1), (3, 5, 11, 1),
    (3, 6, 1, -1), (3, 7, 13, -1), (3, 8, 2, -1), (3, 9, 14, -1), (3, 10, 4, 1), (3, 11, 5, 1),
    (3, 12, 15, 1), (3, 13, 7, -1), (3, 14, 9, -1), (3, 15, 12, 1),
    (4, 0, 4, 1), (4, 1, 7, -1), (4, 2, 9, -1), (4, 3, 10, -1), (4, 4, 0, 1), (4, 5, 12, 1),
    (4, 6, 13, 1), (4, 7, 1, -1), (4, 8, 14, 1), (4, 9, 2, -1), (4, 10, 3, -1), (4, 11, 15, -1),
    (4, 12, 5, 1), (4, 13, 6, 1), (4, 14, 8, 1), (4, 15, 11, -1),
    (5, 0, 5, 1), (5, 2, 1, 1), (5, 3, 11, 1), (5, 4, 12, 1), (5, 8, 6, 1), (5, 9, 7, 1),
    (5, 10, 15, 1), (5, 14, 13, 1),
    (6, 0, 6, 1), (6, 2, 11, -1), (6, 3, 1, 1), (6, 4, 13, 1), (6, 8, 5, -1), (6, 9, 15, -1),
    (6, 10, 7, 1), (6, 14, 12, -1),
    (7, 0, 7, 1), (7, 2, 12, -1), (7, 3, 13, -1), (7, 4, 1, 1), (7, 8, 15, 1), (7, 9, 5, -1),
    (7, 10, 6, -1), (7, 14, 11, 1),
    (8, 0, 8, 1), (8, 1, 11, 1), (8, 2, 3, -1), (8, 3, 2, 1), (8, 4, 14, 1), (8, 5, 6, -1),
    (8, 6, 5, 1), (8, 7, 15, 1), (8, 8, 0, -1), (8, 9, 10, -1), (8, 10, 9, 1), (8, 11, 1, -1),
    (8, 12, 13, -1), (8, 13, 12, 1), (8, 14, 4, -1), (8, 15, 7, -1),
    (9, 0, 9, 1), (9, 1, 12, 1), (9, 2, 4, -1), (9, 3, 14, -1), (9, 4, 2, 1), (9, 5, 7, -1),
    (9, 6, 15, -1), (9, 7, 5, 1), (9, 8, 10, 1), (9, 9, 0, -1), (9, 10, 8, -1), (9, 11, 13, 1),
    (9, 12, 1, -1), (9, 13, 11, -1), (9, 14, 3, 1), (9, 15, 6, 1),
    (10, 0, 10, 1), (10, 1, 13, 1), (10, 2, 14, 1), (10, 3, 4, -1), (10, 4, 3, 1), (10, 5, 15, 1),
    (10, 6, 7, -1), (10, 7, 6, 1), (10, 8, 9, -1), (10, 9, 8, 1), (10, 10, 0, -1), (10, 11, 12, -1),
    (10, 12, 11, 1), (10, 13, 1, -1), (10, 14, 2, -1), (10, 15, 5, -1),
    (11, 0, 11, 1), (11, 2, 6, -1), (11, 3, 5, 1), (11, 4, 15, 1), (11, 8, 1, -1), (11, 9, 13, -1),
    (11, 10, 12, 1), (11, 14, 7, -1),
    (12, 0, 12, 1), (12, 2, 7, -1), (12, 3, 15, -1), (12, 4, 5, 1), (12, 8, 13, 1), (12, 9, 1, -1),
    (12, 10, 11, -1), (12, 14, 6, 1),
    (13, 0, 13, 1), (13, 2, 15, 1), (13, 3, 7, -1), (13, 4, 6, 1), (13, 8, 12, -1), (13, 9, 11, 1),
    (13, 10, 1, -1), (13, 14, 5, -1),
    (14, 0, 14, 1), (14, 1, 15, -1), (14, 2, 10, 1), (14, 3, 9, -1), (14, 4, 8, 1), (14, 5, 13, -1),
    (14, 6, 12, 1), (14, 7, 11, -1), (14, 8, 4, -1), (14, 9, 3, 1), (14, 10, 2, -1), (14, 11, 7, 1),
    (14, 12, 6, -1), (14, 13, 5, 1), (14, 14, 0, -1), (14, 15, 1, 1),
    (15, 0, 15, 1), (15, 2, 13, 1), (15, 3, 12, -1), (15, 4, 11, 1), (15, 8, 7, -1), (15, 9, 6, 1),
    (15, 10, 5, -1), (15, 14, 1, -1),
];

/// Fused join: out[k] += s * a[i] * b[j] computes
/// right_complement(right_complement(a) ^ right_complement(b)).
pub const JOIN_PRODUCT: [(u8, u8, u8, i8); 81] = [
    (0, 15, 0, 1), (1, 14, 0, 1), (1, 15, 1, 1), (2, 13, 0, -1), (2, 15, 2, 1), (3, 12, 0, 1),
    (3, 15, 3, 1), (4, 11, 0, -1), (4, 15, 4, 1), (5, 10, 0, 1), (5, 13, 1, 1), (5, 14, 2, 1),
    (5, 15, 5, 1), (6, 9, 0, -1), (6, 12, 1, -1), (6, 14, 3, 1), (6, 15, 6, 1), (7, 8, 0, 1),
    (7, 11, 1, 1), (7, 14, 4, 1), (7, 15, 7, 1), (8, 7, 0, 1), (8, 12, 2, -1), (8, 13, 3, -1),
    (8, 15, 8, 1), (9, 6, 0, -1), (9, 11, 2, 1), (9, 13, 4, -1), (9, 15, 9, 1), (10, 5, 0, 1),
    (10, 11, 3, 1), (10, 12, 4, 1), (10, 15, 10, 1), (11, 4, 0, 1), (11, 7, 1, 1), (11, 9, 2, 1),
    (11, 10, 3, 1), (11, 12, 5, 1), (11, 13, 6, 1), (11, 14, 8, 1), (11, 15, 11, 1), (12, 3, 0, -1),
    (12, 6, 1, -1), (12, 8, 2, -1), (12, 10, 4, 1), (12, 11, 5, -1), (12, 13, 7, 1), (12, 14, 9, 1),
    (12, 15, 12, 1), (13, 2, 0, 1), (13, 5, 1, 1), (13, 8, 3, -1), (13, 9, 4, -1), (13, 11, 6, -1),
    (13, 12, 7, -1), (13, 14, 10, 1), (13, 15, 13, 1), (14, 1, 0, -1), (14, 5, 2, 1), (14, 6, 3, 1),
    (14, 7, 4, 1), (14, 11, 8, -1), (14, 12, 9, -1), (14, 13, 10, -1), (14, 15, 14, 1), (15, 0, 0, 1),
    (15, 1, 1, 1), (15, 2, 2, 1), (15, 3, 3, 1), (15, 4, 4, 1), (15, 5, 5, 1), (15, 6, 6, 1),
    (15, 7, 7, 1), (15, 8, 8, 1), (15, 9, 9, 1), (15, 10, 10, 1), (15, 11, 11, 1), (15, 12, 12, 1),
    (15, 13, 13, 1), (15, 14, 14, 1), (15, 15, 15, 1),
];

/// Outer (wedge) product: the grade-raising part of the geometric product.
pub const OUTER_PRODUCT: [(u8, u8, u8, i8); 81] = [
    (0, 0, 0, 1), (0, 1, 1, 1), (0, 2, 2, 1), (0, 3, 3, 1), (0, 4, 4, 1), (0, 5, 5, 1),
    (0, 6, 6, 1), (0, 7, 7, 1), (0, 8, 8, 1), (0, 9, 9, 1), (0, 10, 10, 1), (0, 11, 11, 1),
    (0, 12, 12, 1), (0, 13, 13, 1), (0, 14, 14, 1), (0, 15, 15, 1),
    (1, 0, 1, 1), (1, 2, 5, 1), (1, 3, 6, 1), (1, 4, 7, 1), (1, 8, 11, 1), (1, 9, 12, 1),
    (1, 10, 13, 1), (1, 14, 15, 1),
    (2, 0, 2, 1), (2, 1, 5, -1), (2, 3, 8, 1), (2, 4, 9, 1), (2, 6, 11, -1), (2, 7, 12, -1),
    (2, 10, 14, 1), (2, 13, 15, -1),
    (3, 0, 3, 1), (3, 1, 6, -1), (3, 2, 8, -1), (3, 4, 10, 1), (3, 5, 11, 1), (3, 7, 13, -1),
    (3, 9, 14, -1), (3, 12, 15, 1),
    (4, 0, 4, 1), (4, 1, 7, -1), (4, 2, 9, -1), (4, 3, 10, -1), (4, 5, 12, 1), (4, 6, 13, 1),
    (4, 8, 14, 1), (4, 11, 15, -1),
    (5, 0, 5, 1), (5, 3, 11, 1), (5, 4, 12, 1), (5, 10, 15, 1),
    (6, 0, 6, 1), (6, 2, 11, -1), (6, 4, 13, 1), (6, 9, 15, -1),
    (7, 0, 7, 1), (7, 2, 12, -1), (7, 3, 13, -1), (7, 8, 15, 1),
    (8, 0, 8, 1), (8, 1, 11, 1), (8, 4, 14, 1), (8, 7, 15, 1),
    (9, 0, 9, 1), (9, 1, 12, 1), (9, 3, 14, -1), (9, 6, 15, -1),
    (10, 0, 10, 1), (10, 1, 13, 1), (10, 2, 14, 1), (10, 5, 15, 1),
    (11, 0, 11, 1), (11, 4, 15, 1),
    (12, 0, 12, 1), (12, 3, 15, -1),
    (13, 0, 13, 1), (13, 2, 15, 1),
    (14, 0, 14, 1), (14, 1, 15, -1),
    (15, 0, 15, 1),
];

/// Right complement per blade: e_I ^ e_Ic = +e0123, stored as (complement index, sign).
pub const RIGHT_COMPLEMENT: [(u8, i8); DIM] = [
    (15, 1), (14, 1), (13, -1), (12, 1), (11, -1), (10, 1), (9, -1), (8, 1), (7, 1), (6, -1),
    (5, 1), (4, 1), (3, -1), (2, 1), (1, -1), (0, 1),
];

/// The nine equivariant linear basis maps used by equilinear layers: the five
/// grade projections followed by e0 left-multiplication of grades 0..=3.
/// Entries are (source coefficient, destination coefficient); all signs are +1
/// because prepending e0 to an ascending blade needs no swaps.
pub const EQUI_BASIS_MAPS: [&[(usize, usize)]; 9] = [
    &[(0, 0)],
    &[(1, 1), (2, 2), (3, 3), (4, 4)],
    &[(5, 5), (6, 6), (7, 7), (8, 8), (9, 9), (10, 10)],
    &[(11, 11), (12, 12), (13, 13), (14, 14)],
    &[(15, 15)],
    &[(0, 1)],
    &[(2, 5), (3, 6), (4, 7)],
    &[(8, 11), (9, 12), (10, 13)],
    &[(14, 15)],
];

/// Number of equivariant basis maps per channel pair.
pub const EQUI_BASIS: usize = 9;
