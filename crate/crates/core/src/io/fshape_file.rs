//! ASCII OFF and PLY meshes carrying one scalar signal.
//!
//! OFF files append a `#SIGNAL vertex|face N` block of `N` values after the
//! faces. PLY files store the signal as a `signal` property of the vertex
//! or face element.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::{Element, Signal};
use crate::mesh::{TriangleMesh, Vec3};

#[derive(Debug, Clone)]
pub struct FShapeFile {
    pub mesh: TriangleMesh,
    /// `None` when the file has no signal block.
    pub signal: Option<Signal>,
}

impl FShapeFile {
    /// The stored signal, or zero of the requested element when absent.
    /// A stored signal of the other element is converted when possible
    /// (P1 to P0 by barycenter values).
    pub fn signal_as(&self, element: Element) -> Result<Signal> {
        match (&self.signal, element) {
            (None, e) => Ok(Signal::zeros(e, &self.mesh)),
            (Some(s), e) if s.element() == e => Ok(s.clone()),
            (Some(s), Element::P0) => Ok(Signal::P0(s.to_p0(&self.mesh)?)),
            (Some(_), Element::P1) => Err(Error::MeshMismatch(
                "a per-face signal cannot be used where a per-vertex signal is needed".into(),
            )),
        }
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Copy, PartialEq)]
enum Format {
    Off,
    Ply,
}

fn format_of(path: &Path, text: Option<&str>) -> Result<Format> {
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
        Some(e) if e == "off" => Ok(Format::Off),
        Some(e) if e == "ply" => Ok(Format::Ply),
        _ => match text.map(|t| t.trim_start()) {
            Some(t) if t.starts_with("ply") => Ok(Format::Ply),
            Some(t) if t.starts_with("OFF") => Ok(Format::Off),
            _ => Err(Error::Parse {
                line: 1,
                message: format!("{}: unknown mesh format (expected .off or .ply)", path.display()),
            }),
        },
    }
}

pub fn load_fshape(path: impl AsRef<Path>) -> Result<FShapeFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    match format_of(path, Some(&text))? {
        Format::Off => parse_off(&text),
        Format::Ply => parse_ply(&text),
    }
}

pub fn save_fshape(fshape: &FShapeFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = match format_of(path, None)? {
        Format::Off => format_off(fshape),
        Format::Ply => format_ply(fshape),
    };
    std::fs::write(path, text)?;
    Ok(())
}

/// Whitespace-separated tokens tagged with their 1-based line numbers.
struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let item = self.items.get(self.pos).copied().ok_or_else(|| Error::Parse {
            line: self.last_line + 1,
            message: format!("unexpected end of file, expected {what}"),
        })?;
        self.pos += 1;
        Ok(item)
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let (line, tok) = self.next(what)?;
        tok.parse().map_err(|_| Error::Parse {
            line,
            message: format!("expected {what}, found '{tok}'"),
        })
    }

    fn finite(&mut self, what: &str) -> Result<f64> {
        let line = self.peek_line();
        let v: f64 = self.number(what)?;
        if !v.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("{what} is not finite"),
            });
        }
        Ok(v)
    }

    fn peek_line(&self) -> usize {
        self.items.get(self.pos).map_or(self.last_line + 1, |t| t.0)
    }

    fn done(&self) -> bool {
        self.pos >= self.items.len()
    }
}

/// Drops unreferenced vertices and builds the mesh; `vertex_signal` is
/// remapped along.
fn assemble(
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    signal: Option<(Element, Vec<f64>)>,
) -> Result<FShapeFile> {
    let mut remap = vec![usize::MAX; vertices.len()];
    for (k, t) in triangles.iter().enumerate() {
        for &i in t {
            if i >= vertices.len() {
                return Err(Error::IndexOutOfRange {
                    triangle: k,
                    vertex: i,
                    count: vertices.len(),
                });
            }
            remap[i] = 0;
        }
    }
    let mut kept = Vec::new();
    for (i, r) in remap.iter_mut().enumerate() {
        if *r == 0 {
            *r = kept.len();
            kept.push(i);
        }
    }
    let new_vertices = kept.iter().map(|&i| vertices[i]).collect();
    let new_triangles = triangles.iter().map(|t| t.map(|i| remap[i])).collect();
    let mesh = TriangleMesh::new(new_vertices, new_triangles)?;
    let signal = match signal {
        None => None,
        Some((Element::P1, values)) => {
            let values = kept.iter().map(|&i| values[i]).collect();
            Some(Signal::new(Element::P1, &mesh, values)?)
        }
        Some((Element::P0, values)) => Some(Signal::new(Element::P0, &mesh, values)?),
    };
    Ok(FShapeFile { mesh, signal })
}

pub fn parse_off(text: &str) -> Result<FShapeFile> {
    let mut items = Vec::new();
    let mut signal_header: Option<(usize, &str)> = None;
    let mut signal_tokens = Vec::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let trimmed = raw.trim();
        if let Some(rest) = trimmed.strip_prefix("#SIGNAL") {
            if signal_header.is_some() {
                return Err(Error::Parse {
                    line,
                    message: "second #SIGNAL block".into(),
                });
            }
            signal_header = Some((line, rest));
            continue;
        }
        let content = trimmed.split('#').next().unwrap_or("");
        let target = if signal_header.is_some() { &mut signal_tokens } else { &mut items };
        target.extend(content.split_whitespace().map(|t| (line, t)));
    }
    let mut tok = Tokens {
        items,
        pos: 0,
        last_line,
    };
    let (line, magic) = tok.next("OFF header")?;
    if magic != "OFF" {
        return Err(Error::Parse {
            line,
            message: format!("expected 'OFF', found '{magic}'"),
        });
    }
    let nv: usize = tok.number("vertex count")?;
    let nf: usize = tok.number("face count")?;
    let _edges: usize = tok.number("edge count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let x = tok.finite("vertex coordinate")?;
        let y = tok.finite("vertex coordinate")?;
        let z = tok.finite("vertex coordinate")?;
        vertices.push(Vec3::new(x, y, z));
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let line = tok.peek_line();
        let n: usize = tok.number("face size")?;
        if n != 3 {
            return Err(Error::Parse {
                line,
                message: format!("only triangles are supported, found a face with {n} vertices"),
            });
        }
        let a = tok.number("vertex index")?;
        let b = tok.number("vertex index")?;
        let c = tok.number("vertex index")?;
        triangles.push([a, b, c]);
    }
    if !tok.done() {
        let (line, t) = tok.next("")?;
        return Err(Error::Parse {
            line,
            message: format!("unexpected token '{t}' after the faces"),
        });
    }
    let signal = match signal_header {
        None => None,
        Some((line, rest)) => {
            let mut parts = rest.split_whitespace();
            let element = match parts.next() {
                Some("vertex") => Element::P1,
                Some("face") => Element::P0,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("expected 'vertex' or 'face' after #SIGNAL, found {other:?}"),
                    })
                }
            };
            let n: usize = parts.next().and_then(|t| t.parse().ok()).ok_or_else(|| Error::Parse {
                line,
                message: "missing signal count after #SIGNAL".into(),
            })?;
            let expected = if element == Element::P1 { nv } else { nf };
            if n != expected {
                return Err(Error::CountMismatch(format!(
                    "#SIGNAL {} declares {n} values, mesh has {expected}",
                    if element == Element::P1 { "vertex" } else { "face" }
                )));
            }
            let mut st = Tokens {
                items: signal_tokens,
                pos: 0,
                last_line,
            };
            let values = (0..n).map(|_| st.finite("signal value")).collect::<Result<Vec<f64>>>()?;
            if !st.done() {
                return Err(Error::CountMismatch(format!("more than {n} signal values")));
            }
            Some((element, values))
        }
    };
    assemble(vertices, triangles, signal)
}

pub fn format_off(fshape: &FShapeFile) -> String {
    let mesh = &fshape.mesh;
    let mut s = String::new();
    let _ = writeln!(s, "OFF\n{} {} 0", mesh.num_vertices(), mesh.num_triangles());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", fmt_f64(v.x), fmt_f64(v.y), fmt_f64(v.z));
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    if let Some(signal) = &fshape.signal {
        let kind = match signal.element() {
            Element::P1 => "vertex",
            Element::P0 => "face",
        };
        let _ = writeln!(s, "#SIGNAL {kind} {}", signal.values().len());
        for v in signal.values() {
            let _ = writeln!(s, "{}", fmt_f64(*v));
        }
    }
    s
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    /// Scalar property names; `None` marks the face index list.
    properties: Vec<Option<String>>,
}

pub fn parse_ply(text: &str) -> Result<FShapeFile> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let parse_err = |line, message: String| Error::Parse { line, message };
    match lines.next() {
        Some((_, "ply")) => {}
        Some((line, other)) => return Err(parse_err(line, format!("expected 'ply', found '{other}'"))),
        None => return Err(parse_err(1, "empty file".into())),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut header_end = None;
    for (line, l) in lines.by_ref() {
        let words: Vec<&str> = l.split_whitespace().collect();
        match words.as_slice() {
            ["format", "ascii", _] => {}
            ["format", other, ..] => return Err(parse_err(line, format!("unsupported PLY format '{other}'"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad element count '{count}'")))?,
                properties: Vec::new(),
            }),
            ["property", "list", _, _, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(line, "property before any element".into()))?;
                if el.name != "face" || (*name != "vertex_indices" && *name != "vertex_index") {
                    return Err(parse_err(line, format!("unsupported list property '{name}'")));
                }
                el.properties.push(None);
            }
            ["property", _ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(line, "property before any element".into()))?;
                el.properties.push(Some(name.to_string()));
            }
            ["end_header"] => {
                header_end = Some(line);
                break;
            }
            _ => return Err(parse_err(line, format!("unrecognized header line '{l}'"))),
        }
    }
    let header_end = header_end.ok_or_else(|| parse_err(text.lines().count() + 1, "missing end_header".into()))?;
    let mut tok = Tokens {
        items: lines.flat_map(|(line, l)| l.split_whitespace().map(move |t| (line, t))).collect(),
        pos: 0,
        last_line: text.lines().count().max(header_end),
    };
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut signal: Option<(Element, Vec<f64>)> = None;
    for el in &elements {
        match el.name.as_str() {
            "vertex" => {
                for _ in 0..el.count {
                    let mut p = [f64::NAN; 3];
                    let mut s = None;
                    for prop in &el.properties {
                        let name = prop.as_deref().unwrap_or("");
                        let v = tok.finite(&format!("vertex property '{name}'"))?;
                        match name {
                            "x" => p[0] = v,
                            "y" => p[1] = v,
                            "z" => p[2] = v,
                            "signal" => s = Some(v),
                            _ => {}
                        }
                    }
                    if p.iter().any(|c| c.is_nan()) {
                        return Err(parse_err(header_end, "vertex element lacks x, y or z".into()));
                    }
                    vertices.push(Vec3::from(p));
                    if let Some(v) = s {
                        signal.get_or_insert((Element::P1, Vec::new())).1.push(v);
                    }
                }
            }
            "face" => {
                for _ in 0..el.count {
                    let mut s = None;
                    for prop in &el.properties {
                        match prop {
                            None => {
                                let line = tok.peek_line();
                                let n: usize = tok.number("face size")?;
                                if n != 3 {
                                    return Err(parse_err(
                                        line,
                                        format!("only triangles are supported, found a face with {n} vertices"),
                                    ));
                                }
                                let a = tok.number("vertex index")?;
                                let b = tok.number("vertex index")?;
                                let c = tok.number("vertex index")?;
                                triangles.push([a, b, c]);
                            }
                            Some(name) => {
                                let v = tok.finite(&format!("face property '{name}'"))?;
                                if name == "signal" {
                                    s = Some(v);
                                }
                            }
                        }
                    }
                    if let Some(v) = s {
                        match &mut signal {
                            Some((Element::P1, _)) => {
                                return Err(Error::CountMismatch("signal given on both vertices and faces".into()))
                            }
                            other => other.get_or_insert((Element::P0, Vec::new())).1.push(v),
                        };
                    }
                }
            }
            other => {
                let n = el.properties.len() * el.count;
                if el.properties.iter().any(|p| p.is_none()) {
                    return Err(parse_err(header_end, format!("unsupported list in element '{other}'")));
                }
                for _ in 0..n {
                    tok.next("element data")?;
                }
            }
        }
    }
    if !tok.done() {
        let (line, t) = tok.next("")?;
        return Err(parse_err(line, format!("unexpected token '{t}' after the element data")));
    }
    assemble(vertices, triangles, signal)
}

pub fn format_ply(fshape: &FShapeFile) -> String {
    let mesh = &fshape.mesh;
    let element = fshape.signal.as_ref().map(|s| s.element());
    let mut s = String::new();
    let _ = writeln!(s, "ply\nformat ascii 1.0\nelement vertex {}", mesh.num_vertices());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    if element == Some(Element::P1) {
        s.push_str("property double signal\n");
    }
    let _ = writeln!(s, "element face {}", mesh.num_triangles());
    s.push_str("property list uchar int vertex_indices\n");
    if element == Some(Element::P0) {
        s.push_str("property double signal\n");
    }
    s.push_str("end_header\n");
    let values = fshape.signal.as_ref().map(|s| s.values());
    for (i, v) in mesh.vertices().iter().enumerate() {
        let _ = write!(s, "{} {} {}", fmt_f64(v.x), fmt_f64(v.y), fmt_f64(v.z));
        if element == Some(Element::P1) {
            let _ = write!(s, " {}", fmt_f64(values.unwrap()[i]));
        }
        s.push('\n');
    }
    for (k, t) in mesh.triangles().iter().enumerate() {
        let _ = write!(s, "3 {} {} {}", t[0], t[1], t[2]);
        if element == Some(Element::P0) {
            let _ = write!(s, " {}", fmt_f64(values.unwrap()[k]));
        }
        s.push('\n');
    }
    s
}
