//! File formats: comma-separated matrices, `x,y,value` signal tables, and
//! PGM greyscale images (ASCII `P2` and binary `P5`).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{DenseMatrix, DomainKind, Point2, Signal};

pub(crate) fn fmt_f64(v: f64) -> String {
    // 17 significant digits round-trip every finite double.
    format!("{v:.16e}")
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

pub fn load_matrix_csv(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(path, lineno + 1, format!("not a number: {:?}", tok.trim())))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(format_err(
                    path,
                    format!(
                        "ragged rows: line {} has {} fields, expected {}",
                        lineno + 1,
                        row.len(),
                        first.len()
                    ),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(format_err(path, "empty matrix file"));
    }
    DenseMatrix::from_rows(&rows).map_err(|e| format_err(path, e.to_string()))
}

pub fn matrix_to_csv(a: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..a.rows() {
        let line: Vec<String> = a.row(i).iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn save_matrix_csv(path: impl AsRef<Path>, a: &DenseMatrix) -> Result<()> {
    fs::write(path, matrix_to_csv(a))?;
    Ok(())
}

pub fn save_signal_csv(path: impl AsRef<Path>, signal: &Signal) -> Result<()> {
    let mut out = String::from("x,y,value\n");
    for (p, v) in signal.points().iter().zip(signal.values()) {
        let _ = writeln!(out, "{},{},{}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(*v));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Loads an `x,y,value` table. The domain kind is recorded as a curve
/// unless the caller knows better.
pub fn load_signal_csv(path: impl AsRef<Path>) -> Result<Signal> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "x,y,value" => {}
        _ => return Err(format_err(path, "expected header `x,y,value`")),
    }
    let mut points = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(format_err(path, format!("line {} needs 3 fields", lineno + 1)));
        }
        let mut nums = [0.0; 3];
        for (k, f) in fields.iter().enumerate() {
            nums[k] = f
                .parse()
                .map_err(|_| parse_err(path, lineno + 1, format!("not a number: {f:?}")))?;
        }
        points.push([nums[0], nums[1]]);
        values.push(nums[2]);
    }
    Signal::new(points, values, DomainKind::Curve).map_err(|e| format_err(path, e.to_string()))
}

/// Writes a point list with header `x,y`.
pub fn save_points_csv(path: impl AsRef<Path>, points: &[Point2]) -> Result<()> {
    let mut out = String::from("x,y\n");
    for p in points {
        let _ = writeln!(out, "{},{}", fmt_f64(p[0]), fmt_f64(p[1]));
    }
    fs::write(path, out)?;
    Ok(())
}

struct PgmHeader {
    binary: bool,
    width: usize,
    height: usize,
    maxval: usize,
    data_start: usize,
}

fn parse_pgm_header(path: &Path, bytes: &[u8]) -> Result<PgmHeader> {
    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'2' || bytes[1] == b'5') {
        return Err(format_err(path, "bad magic number (expected P2 or P5)"));
    }
    let binary = bytes[1] == b'5';
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(path, "truncated or malformed header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(path, "header value out of range"))?;
    }
    // exactly one whitespace byte separates the header from binary data
    if pos >= bytes.len() && binary {
        return Err(format_err(path, "truncated payload"));
    }
    if pos < bytes.len() {
        if !bytes[pos].is_ascii_whitespace() {
            return Err(format_err(path, "malformed header terminator"));
        }
        pos += 1;
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(format_err(path, format!("maxval {maxval} outside 1..=65535")));
    }
    if width == 0 || height == 0 {
        return Err(format_err(path, "zero image dimension"));
    }
    Ok(PgmHeader {
        binary,
        width,
        height,
        maxval,
        data_start: pos,
    })
}

/// Loads a PGM image as a `height × width` matrix scaled to `[0, 1]`.
pub fn load_image_pgm(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let h = parse_pgm_header(path, &bytes)?;
    let n = h.width * h.height;
    let scale = h.maxval as f64;
    let mut data = Vec::with_capacity(n);
    if h.binary {
        let wide = h.maxval > 255;
        let need = n * if wide { 2 } else { 1 };
        let payload = &bytes[h.data_start..];
        if payload.len() < need {
            return Err(format_err(path, "truncated payload"));
        }
        for k in 0..n {
            let v = if wide {
                u16::from_be_bytes([payload[2 * k], payload[2 * k + 1]]) as usize
            } else {
                payload[k] as usize
            };
            if v > h.maxval {
                return Err(format_err(path, format!("pixel {v} exceeds maxval")));
            }
            data.push(v as f64 / scale);
        }
    } else {
        let text = std::str::from_utf8(&bytes[h.data_start..])
            .map_err(|_| format_err(path, "non-ASCII payload in P2 file"))?;
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_ascii_whitespace);
        for _ in 0..n {
            let tok = tokens.next().ok_or_else(|| format_err(path, "truncated payload"))?;
            let v: usize = tok
                .parse()
                .map_err(|_| format_err(path, format!("bad pixel value {tok:?}")))?;
            if v > h.maxval {
                return Err(format_err(path, format!("pixel {v} exceeds maxval")));
            }
            data.push(v as f64 / scale);
        }
    }
    DenseMatrix::from_vec(h.height, h.width, data)
}

fn quantise(v: f64, maxval: usize) -> usize {
    (v.clamp(0.0, 1.0) * maxval as f64).round() as usize
}

/// Encodes a `[0,1]` matrix as PGM bytes; values are clamped and rounded.
pub fn encode_pgm(a: &DenseMatrix, maxval: usize, binary: bool) -> Result<Vec<u8>> {
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Argument(format!("maxval {maxval} outside 1..=65535")));
    }
    let mut out = format!(
        "{}\n{} {}\n{}\n",
        if binary { "P5" } else { "P2" },
        a.cols(),
        a.rows(),
        maxval
    )
    .into_bytes();
    if binary {
        for &v in a.data() {
            let q = quantise(v, maxval);
            if maxval > 255 {
                out.extend_from_slice(&(q as u16).to_be_bytes());
            } else {
                out.push(q as u8);
            }
        }
    } else {
        for i in 0..a.rows() {
            let line: Vec<String> = a.row(i).iter().map(|v| quantise(*v, maxval).to_string()).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    }
    Ok(out)
}

pub fn save_image_pgm(path: impl AsRef<Path>, a: &DenseMatrix, maxval: usize, binary: bool) -> Result<()> {
    fs::write(path, encode_pgm(a, maxval, binary)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn csv_basic() {
        let d = tmp();
        let p = d.path().join("a.csv");
        fs::write(&p, "1,2\n3,4").unwrap();
        let a = load_matrix_csv(&p).unwrap();
        assert_eq!(a, DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        fs::write(&p, "0").unwrap();
        assert_eq!(load_matrix_csv(&p).unwrap(), DenseMatrix::zeros(1, 1));
    }

    #[test]
    fn csv_errors() {
        let d = tmp();
        let p = d.path().join("a.csv");
        fs::write(&p, "1,2\n3").unwrap();
        assert!(matches!(load_matrix_csv(&p), Err(Error::Format { .. })));
        fs::write(&p, "1,2\n3,x\n").unwrap();
        match load_matrix_csv(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..70).map(|_| rng.random::<f64>() * 1e3 - 500.0).collect();
        let a = DenseMatrix::from_vec(10, 7, data).unwrap();
        let d = tmp();
        let p = d.path().join("r.csv");
        save_matrix_csv(&p, &a).unwrap();
        assert_eq!(load_matrix_csv(&p).unwrap(), a);
    }

    #[test]
    fn pgm_examples() {
        let d = tmp();
        let p = d.path().join("a.pgm");
        fs::write(&p, "P2\n# comment\n2 2\n255\n0 255\n255 0\n").unwrap();
        let a = load_image_pgm(&p).unwrap();
        assert_eq!(a, DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap());

        let mut bytes = b"P5\n1 1\n255\n".to_vec();
        bytes.push(128);
        fs::write(&p, bytes).unwrap();
        assert_eq!(load_image_pgm(&p).unwrap().get(0, 0), 128.0 / 255.0);
    }

    #[test]
    fn pgm_errors() {
        let d = tmp();
        let p = d.path().join("a.pgm");
        for bad in [
            &b"P3\n1 1\n255\n0\n"[..],
            &b"P2\n2 2\n255\n0 1 2\n"[..],
            &b"P2\n1 1\n0\n0\n"[..],
            &b"P5\n2 2\n255\n\x01\x02"[..],
        ] {
            fs::write(&p, bad).unwrap();
            assert!(matches!(load_image_pgm(&p), Err(Error::Format { .. })), "{bad:?}");
        }
    }

    #[test]
    fn p2_and_p5_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let vals: Vec<f64> = (0..64).map(|_| rng.random_range(0..=255) as f64 / 255.0).collect();
        let a = DenseMatrix::from_vec(8, 8, vals).unwrap();
        let d = tmp();
        let (p2, p5) = (d.path().join("a2.pgm"), d.path().join("a5.pgm"));
        save_image_pgm(&p2, &a, 255, false).unwrap();
        save_image_pgm(&p5, &a, 255, true).unwrap();
        let (b2, b5) = (load_image_pgm(&p2).unwrap(), load_image_pgm(&p5).unwrap());
        assert_eq!(b2, b5);
        assert_eq!(b2, a);
    }

    #[test]
    fn p5_sixteen_bit() {
        let a = DenseMatrix::from_vec(1, 3, vec![0.0, 0.5, 1.0]).unwrap();
        let d = tmp();
        let p = d.path().join("w.pgm");
        save_image_pgm(&p, &a, 65535, true).unwrap();
        let b = load_image_pgm(&p).unwrap();
        assert!(b.max_abs_diff(&a) <= 0.5 / 65535.0);
    }

    #[test]
    fn p2_save_load_save_is_bytewise_stable() {
        let d = tmp();
        let p = d.path().join("s.pgm");
        let text = "P2\n3 2\n15\n0 7 15\n3 3 1\n";
        fs::write(&p, text).unwrap();
        let a = load_image_pgm(&p).unwrap();
        assert_eq!(encode_pgm(&a, 15, false).unwrap(), text.as_bytes());
    }

    #[test]
    fn signal_csv_round_trip() {
        let s = Signal::new(
            vec![[0.0, 1.0], [0.25, 0.5]],
            vec![1.0 / 3.0, -2.0],
            DomainKind::Curve,
        )
        .unwrap();
        let d = tmp();
        let p = d.path().join("s.csv");
        save_signal_csv(&p, &s).unwrap();
        assert_eq!(load_signal_csv(&p).unwrap(), s);
    }
}
