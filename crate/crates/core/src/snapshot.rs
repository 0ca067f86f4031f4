//! `GNSF1` text snapshots of spectral vector fields.
//!
//! ```text
//! GNSF1 M=<int> L=<real>
//! k1 k2 k3 comp re im
//! ...
//! ```
//!
//! Only the positive half of each conjugate pair is written; the other half
//! is reconstructed by conjugation on read. Reals use 17 significant digits
//! so every `f64` round-trips.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::SpectralVectorField;
use crate::lattice::{build_lattice, PERIOD};

pub const MAGIC: &str = "GNSF1";

pub fn write_snapshot<W: Write>(field: &SpectralVectorField, mut out: W) -> Result<()> {
    out.write_all(to_string(field).as_bytes())?;
    Ok(())
}

pub fn to_string(field: &SpectralVectorField) -> String {
    let lat = field.lattice();
    let mut s = format!("{MAGIC} M={} L={:.16e}\n", lat.m(), lat.period());
    for i in lat.positive_half_start()..lat.len() {
        let k = lat.mode(i);
        for (comp, c) in field.coeffs()[i].iter().enumerate() {
            let _ = writeln!(s, "{} {} {} {} {:.16e} {:.16e}", k[0], k[1], k[2], comp, c.re, c.im);
        }
    }
    s
}

pub fn read_snapshot<R: BufRead>(input: R) -> Result<SpectralVectorField> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Snapshot {
        line: 1,
        msg: "empty input".into(),
    })?;
    let header = header?;
    let bad = |line: usize, msg: &str| Error::Snapshot {
        line,
        msg: msg.to_string(),
    };

    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(bad(1, "missing GNSF1 magic"));
    }
    let m: usize = parts
        .next()
        .and_then(|p| p.strip_prefix("M="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad(1, "expected M=<int>"))?;
    let l: f64 = parts
        .next()
        .and_then(|p| p.strip_prefix("L="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad(1, "expected L=<real>"))?;
    if (l - PERIOD).abs() > 1e-12 {
        return Err(bad(1, "only L=2π boxes are supported"));
    }
    let lattice = build_lattice(m).map_err(|e| bad(1, &e.to_string()))?;
    let mut field = SpectralVectorField::zeros(&lattice);
    let mut seen = vec![[false; 3]; lattice.len()];

    for (n, line) in lines {
        let line = line?;
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 6 {
            return Err(bad(lineno, "expected `k1 k2 k3 comp re im`"));
        }
        let int = |s: &str| s.parse::<i32>().map_err(|_| bad(lineno, "bad integer"));
        let real = |s: &str| s.parse::<f64>().map_err(|_| bad(lineno, "bad real"));
        let k = [int(tok[0])?, int(tok[1])?, int(tok[2])?];
        let comp = int(tok[3])?;
        if !(0..3).contains(&comp) {
            return Err(bad(lineno, "comp must be 0, 1 or 2"));
        }
        let idx = lattice
            .index_of(k)
            .ok_or_else(|| bad(lineno, "mode outside lattice"))?;
        let (idx, conj) = if idx >= lattice.positive_half_start() {
            (idx, false)
        } else {
            (lattice.conjugate(idx), true)
        };
        let comp = comp as usize;
        if seen[idx][comp] {
            return Err(bad(lineno, "duplicate entry for conjugate pair"));
        }
        seen[idx][comp] = true;
        let mut c = Complex64::new(real(tok[4])?, real(tok[5])?);
        if conj {
            c = c.conj();
        }
        let j = lattice.conjugate(idx);
        field.coeffs_mut()[idx][comp] = c;
        field.coeffs_mut()[j][comp] = c.conj();
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::random_divfree_field;
    use proptest::prelude::*;

    #[test]
    fn header_format() {
        let l = build_lattice(4).unwrap();
        let s = to_string(&SpectralVectorField::zeros(&l));
        let first = s.lines().next().unwrap();
        assert_eq!(first, "GNSF1 M=4 L=6.2831853071795862e0");
        assert_eq!(s.lines().count(), 1 + 13 * 3);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_snapshot("GNSF2 M=4 L=6.28\n".as_bytes()).is_err());
        assert!(read_snapshot("GNSF1 M=5 L=6.2831853071795862e0\n".as_bytes()).is_err());
        let dup = "GNSF1 M=4 L=6.2831853071795862e0\n1 0 0 1 1.0 0.0\n-1 0 0 1 1.0 0.0\n";
        assert!(read_snapshot(dup.as_bytes()).is_err());
        let oob = "GNSF1 M=4 L=6.2831853071795862e0\n2 0 0 1 1.0 0.0\n";
        assert!(read_snapshot(oob.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(seed in any::<u64>(), decay in 0.0f64..2.0, amp in 1e-8f64..1e3) {
            let l = build_lattice(6).unwrap();
            let f = random_divfree_field(&l, decay, amp, seed);
            let back = read_snapshot(to_string(&f).as_bytes()).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
