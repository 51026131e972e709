//! Canonical ordering of requirement and stakeholder ids.
//!
//! Ids are compared in natural order: runs of ASCII digits compare by numeric
//! value, everything else byte-wise, so `r2 < r10`. Ties between ids that are
//! numerically equal but spelled differently (`r01` vs `r1`) fall back to a
//! plain byte comparison, which keeps the order total.

use std::cmp::Ordering;

pub fn id_cmp(a: &str, b: &str) -> Ordering {
    let (mut x, mut y) = (a.as_bytes(), b.as_bytes());
    loop {
        match (x.first(), y.first()) {
            (None, None) => return a.cmp(b),
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(cx), Some(cy)) => {
                if cx.is_ascii_digit() && cy.is_ascii_digit() {
                    let (dx, rx) = split_digits(x);
                    let (dy, ry) = split_digits(y);
                    let ord = cmp_numeric(dx, dy);
                    if ord != Ordering::Equal {
                        return ord;
                    }
                    x = rx;
                    y = ry;
                } else {
                    let ord = cx.cmp(cy);
                    if ord != Ordering::Equal {
                        return ord;
                    }
                    x = &x[1..];
                    y = &y[1..];
                }
            }
        }
    }
}

fn split_digits(s: &[u8]) -> (&[u8], &[u8]) {
    let end = s.iter().position(|c| !c.is_ascii_digit()).unwrap_or(s.len());
    s.split_at(end)
}

fn cmp_numeric(a: &[u8], b: &[u8]) -> Ordering {
    let strip = |s: &[u8]| -> usize { s.iter().position(|&c| c != b'0').unwrap_or(s.len()) };
    let (a, b) = (&a[strip(a)..], &b[strip(b)..]);
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

/// Orders a symmetric pair so the smaller id comes first.
pub fn canonical_pair<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if id_cmp(a, b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    }
}
