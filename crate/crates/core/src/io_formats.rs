//! ASCII OFF meshes, legacy VTK polydata and the number formatting used by
//! the convergence tables.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: non-triangular face with {count} vertices")]
    NonTriangular { line: usize, count: usize },
    #[error("invalid data: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffDocument {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
}

/// Non-empty lines with `#` comments removed, paired with 1-based line
/// numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(n, l)| {
        let l = l.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = l.split_whitespace().collect();
        (!tokens.is_empty()).then_some((n + 1, tokens))
    })
}

fn parse_token<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, FormatError> {
    tok.parse().map_err(|_| FormatError::Parse {
        line,
        reason: format!("invalid {what} '{tok}'"),
    })
}

pub fn parse_off(text: &str) -> Result<OffDocument, FormatError> {
    let mut lines = content_lines(text);
    let eof = |what: &str| FormatError::Parse {
        line: text.lines().count(),
        reason: format!("unexpected end of file, expected {what}"),
    };
    let (hline, header) = lines.next().ok_or_else(|| eof("OFF header"))?;
    if header[0] != "OFF" {
        return Err(FormatError::Parse {
            line: hline,
            reason: format!("expected 'OFF' header, found '{}'", header[0]),
        });
    }
    // counts may follow the header on the same line
    let (cline, counts) = if header.len() > 1 {
        (hline, header[1..].to_vec())
    } else {
        lines.next().ok_or_else(|| eof("vertex and face counts"))?
    };
    if counts.len() < 2 {
        return Err(FormatError::Parse {
            line: cline,
            reason: "expected vertex and face counts".into(),
        });
    }
    let nv: usize = parse_token(counts[0], cline, "vertex count")?;
    let nf: usize = parse_token(counts[1], cline, "face count")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, tok) = lines.next().ok_or_else(|| eof("vertex"))?;
        if tok.len() < 3 {
            return Err(FormatError::Parse {
                line,
                reason: "vertex needs three coordinates".into(),
            });
        }
        let mut v = [0.0f64; 3];
        for k in 0..3 {
            v[k] = parse_token(tok[k], line, "coordinate")?;
            if !v[k].is_finite() {
                return Err(FormatError::Parse {
                    line,
                    reason: "non-finite coordinate".into(),
                });
            }
        }
        vertices.push(v);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line, tok) = lines.next().ok_or_else(|| eof("face"))?;
        let count: usize = parse_token(tok[0], line, "face size")?;
        if count != 3 {
            return Err(FormatError::NonTriangular { line, count });
        }
        if tok.len() < 4 {
            return Err(FormatError::Parse {
                line,
                reason: "face needs three vertex indices".into(),
            });
        }
        let mut f = [0; 3];
        for k in 0..3 {
            f[k] = parse_token(tok[k + 1], line, "vertex index")?;
            if f[k] >= nv {
                return Err(FormatError::Parse {
                    line,
                    reason: format!("vertex index {} out of range (0..{nv})", f[k]),
                });
            }
        }
        faces.push(f);
    }
    if let Some((line, _)) = lines.next() {
        return Err(FormatError::Parse {
            line,
            reason: "trailing data after last face".into(),
        });
    }
    Ok(OffDocument { vertices, faces })
}

pub fn write_off(doc: &OffDocument) -> String {
    let mut s = String::new();
    writeln!(s, "OFF").unwrap();
    writeln!(s, "{} {} 0", doc.vertices.len(), doc.faces.len()).unwrap();
    for v in &doc.vertices {
        writeln!(s, "{} {} {}", v[0], v[1], v[2]).unwrap();
    }
    for f in &doc.faces {
        writeln!(s, "3 {} {} {}", f[0], f[1], f[2]).unwrap();
    }
    s
}

/// Triangle surface with per-point scalar fields.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkDocument {
    pub points: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    pub fields: Vec<(String, Vec<f64>)>,
}

pub fn write_vtk(doc: &VtkDocument) -> Result<String, FormatError> {
    for (name, values) in &doc.fields {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(FormatError::Validation(format!(
                "field name '{name}' must be non-empty without whitespace"
            )));
        }
        if values.len() != doc.points.len() {
            return Err(FormatError::Validation(format!(
                "field '{name}' has {} values for {} points",
                values.len(),
                doc.points.len()
            )));
        }
    }
    let mut s = String::new();
    writeln!(s, "# vtk DataFile Version 3.0").unwrap();
    writeln!(s, "surface-nzt solution").unwrap();
    writeln!(s, "ASCII").unwrap();
    writeln!(s, "DATASET POLYDATA").unwrap();
    writeln!(s, "POINTS {} double", doc.points.len()).unwrap();
    for p in &doc.points {
        writeln!(s, "{} {} {}", p[0], p[1], p[2]).unwrap();
    }
    writeln!(s, "POLYGONS {} {}", doc.triangles.len(), 4 * doc.triangles.len()).unwrap();
    for t in &doc.triangles {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    if !doc.fields.is_empty() {
        writeln!(s, "POINT_DATA {}", doc.points.len()).unwrap();
        for (name, values) in &doc.fields {
            writeln!(s, "SCALARS {name} double 1").unwrap();
            writeln!(s, "LOOKUP_TABLE default").unwrap();
            for v in values {
                writeln!(s, "{v}").unwrap();
            }
        }
    }
    Ok(s)
}

struct Tokens<'a> {
    inner: Box<dyn Iterator<Item = (usize, &'a str)> + 'a>,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str, skip: usize) -> Self {
        Tokens {
            inner: Box::new(
                text.lines()
                    .enumerate()
                    .skip(skip)
                    .flat_map(|(n, l)| l.split_whitespace().map(move |t| (n + 1, t))),
            ),
            last_line: skip,
        }
    }

    fn try_next(&mut self) -> Option<(usize, &'a str)> {
        let t = self.inner.next();
        if let Some((l, _)) = t {
            self.last_line = l;
        }
        t
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str), FormatError> {
        self.try_next().ok_or_else(|| FormatError::Parse {
            line: self.last_line,
            reason: format!("unexpected end of file, expected {what}"),
        })
    }

    fn keyword(&mut self, word: &str) -> Result<(), FormatError> {
        let (line, t) = self.next(word)?;
        if t != word {
            return Err(FormatError::Parse {
                line,
                reason: format!("expected '{word}', found '{t}'"),
            });
        }
        Ok(())
    }

    fn parse<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, FormatError> {
        let (line, t) = self.next(what)?;
        parse_token(t, line, what)
    }
}

/// Reader for the subset produced by [`write_vtk`].
pub fn read_vtk(text: &str) -> Result<VtkDocument, FormatError> {
    // version line and title are free-form
    let mut toks = Tokens::new(text, 2);
    toks.keyword("ASCII")?;
    toks.keyword("DATASET")?;
    toks.keyword("POLYDATA")?;
    toks.keyword("POINTS")?;
    let np: usize = toks.parse("point count")?;
    toks.next("point type")?;
    let mut points = Vec::with_capacity(np);
    for _ in 0..np {
        points.push([toks.parse("coordinate")?, toks.parse("coordinate")?, toks.parse("coordinate")?]);
    }
    toks.keyword("POLYGONS")?;
    let nt: usize = toks.parse("polygon count")?;
    toks.next("polygon size")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let count: usize = toks.parse("polygon size")?;
        if count != 3 {
            return Err(FormatError::NonTriangular {
                line: toks.last_line,
                count,
            });
        }
        triangles.push([toks.parse("index")?, toks.parse("index")?, toks.parse("index")?]);
    }
    let mut fields = Vec::new();
    if let Some((line, t)) = toks.try_next() {
        if t != "POINT_DATA" {
            return Err(FormatError::Parse {
                line,
                reason: format!("expected 'POINT_DATA', found '{t}'"),
            });
        }
        toks.next("point data count")?;
        while let Some((line, t)) = toks.try_next() {
            if t != "SCALARS" {
                return Err(FormatError::Parse {
                    line,
                    reason: format!("expected 'SCALARS', found '{t}'"),
                });
            }
            let name = toks.next("field name")?.1.to_string();
            toks.next("field type")?;
            toks.next("component count")?;
            toks.keyword("LOOKUP_TABLE")?;
            toks.next("table name")?;
            let mut values = Vec::with_capacity(np);
            for _ in 0..np {
                values.push(toks.parse("value")?);
            }
            fields.push((name, values));
        }
    }
    Ok(VtkDocument {
        points,
        triangles,
        fields,
    })
}

/// Scientific notation with three significant digits and a two-digit signed
/// exponent, e.g. `7.54e-02`.
pub fn format_scientific(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.2e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Order with two decimals; empty when undefined.
pub fn format_order(order: Option<f64>) -> String {
    order.map(|o| format!("{o:.2}")).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TETRA: &str = "OFF\n4 4 6\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";

    #[test]
    fn parses_tetrahedron() {
        let d = parse_off(TETRA).unwrap();
        assert_eq!(d.vertices.len(), 4);
        assert_eq!(d.faces.len(), 4);
        assert_eq!(d.faces[3], [1, 2, 3]);
    }

    #[test]
    fn header_with_counts_on_same_line() {
        let d = parse_off("OFF 3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2 255 0 0\n").unwrap();
        assert_eq!(d.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn quad_rejected() {
        let e = parse_off("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n").unwrap_err();
        assert!(matches!(e, FormatError::NonTriangular { line: 7, count: 4 }));
        assert!(e.to_string().contains("non-triangular face"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_off("OFF\n3 1 0\n0 0 0\n1 x 0\n0 1 0\n3 0 1 2\n").unwrap_err();
        assert!(matches!(e, FormatError::Parse { line: 4, .. }), "{e}");
        let e = parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n").unwrap_err();
        assert!(matches!(e, FormatError::Parse { line: 6, .. }));
        assert!(parse_off("PLY\n").is_err());
        assert!(parse_off("OFF\n3 1 0\n0 0 0\n").is_err());
    }

    #[test]
    fn comments_are_ignored() {
        let base = parse_off(TETRA).unwrap();
        let lines: Vec<&str> = TETRA.lines().collect();
        for k in 0..=lines.len() {
            let mut l = lines.clone();
            l.insert(k, "# a comment line");
            let mut text = l.join("\n");
            text = text.replacen("1 0 0", "1 0 0 # trailing", 1);
            assert_eq!(parse_off(&text).unwrap(), base);
        }
    }

    #[test]
    fn scientific_formatting() {
        assert_eq!(format_scientific(7.5432e-2), "7.54e-02");
        assert_eq!(format_scientific(21.5), "2.15e+01");
        assert_eq!(format_scientific(1.0), "1.00e+00");
        assert_eq!(format_scientific(1.19e-3), "1.19e-03");
        assert_eq!(format_scientific(0.0), "0.00e+00");
        assert_eq!(format_order(Some(1.996)), "2.00");
        assert_eq!(format_order(None), "");
    }

    #[test]
    fn vtk_round_trip_and_validation() {
        let doc = VtkDocument {
            points: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.25]],
            triangles: vec![[0, 1, 2]],
            fields: vec![("u_h".into(), vec![1.0, 2.5, -3.0]), ("grad".into(), vec![0.1, 0.2, 0.3])],
        };
        let text = write_vtk(&doc).unwrap();
        assert!(text.contains("POINTS 3 double"));
        assert!(text.contains("POLYGONS 1 4"));
        assert_eq!(read_vtk(&text).unwrap(), doc);
        let mut bad = doc.clone();
        bad.fields[0].0 = String::new();
        assert!(matches!(write_vtk(&bad), Err(FormatError::Validation(_))));
        let mut bad = doc;
        bad.fields[1].1.pop();
        assert!(write_vtk(&bad).is_err());
    }

    proptest! {
        #[test]
        fn off_round_trip(
            verts in prop::collection::vec(prop::array::uniform3(-1e3f64..1e3), 3..20),
            seeds in prop::collection::vec(prop::array::uniform3(0usize..1000), 1..20),
        ) {
            let n = verts.len();
            let faces = seeds.iter().map(|s| [s[0] % n, s[1] % n, s[2] % n]).collect();
            let doc = OffDocument { vertices: verts, faces };
            prop_assert_eq!(parse_off(&write_off(&doc)).unwrap(), doc);
        }
    }
}
