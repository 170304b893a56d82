//! Text checkpoints.
//!
//! ```text
//! mlp 1
//! input 7
//! layers 2
//! layer 128 relu
//! layer 8 softmax
//! weights 0 128 7
//! <128 lines of 7 values>
//! biases 0 128
//! <one line of 128 values>
//! ...
//! end
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! save/load cycle is bit-exact.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, Adam, Layer, MlpNet, ParamGrads};
use crate::error::{Error, Result};

const NET_MAGIC: &str = "mlp 1";
const ADAM_MAGIC: &str = "adam 1";

/// Line-numbered reader over checkpoint text.
pub(crate) struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            line: 0,
        }
    }

    pub(crate) fn next_line(&mut self) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim_end())
            }
            None => Err(Error::parse(self.line + 1, "unexpected end of checkpoint")),
        }
    }

    pub(crate) fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.line, msg)
    }

    /// Reads `keyword v1 v2 …` and returns the values.
    pub(crate) fn keyed(&mut self, keyword: &str) -> Result<Vec<&'a str>> {
        let l = self.next_line()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(keyword) {
            return Err(self.err(format!("expected `{keyword}`, got `{l}`")));
        }
        Ok(parts.collect())
    }

    pub(crate) fn keyed_usize(&mut self, keyword: &str, count: usize) -> Result<Vec<usize>> {
        let parts = self.keyed(keyword)?;
        if parts.len() != count {
            return Err(self.err(format!("`{keyword}` expects {count} values")));
        }
        parts
            .iter()
            .map(|p| p.parse().map_err(|_| self.err(format!("bad integer `{p}`"))))
            .collect()
    }

    pub(crate) fn keyed_f64(&mut self, keyword: &str) -> Result<f64> {
        let parts = self.keyed(keyword)?;
        match parts.as_slice() {
            [v] => v.parse().map_err(|_| self.err(format!("bad number `{v}`"))),
            _ => Err(self.err(format!("`{keyword}` expects one value"))),
        }
    }

    fn values(&mut self, expected: usize) -> Result<Vec<f64>> {
        let l = self.next_line()?;
        let vals: Vec<f64> = l
            .split_whitespace()
            .map(|p| p.parse().map_err(|_| self.err(format!("bad number `{p}`"))))
            .collect::<Result<_>>()?;
        if vals.len() != expected {
            return Err(self.err(format!("expected {expected} values, got {}", vals.len())));
        }
        Ok(vals)
    }

    pub(crate) fn expect(&mut self, exact: &str) -> Result<()> {
        let l = self.next_line()?;
        if l != exact {
            return Err(self.err(format!("expected `{exact}`, got `{l}`")));
        }
        Ok(())
    }
}

fn push_row<'a>(out: &mut String, vals: impl Iterator<Item = &'a f64>) {
    let mut first = true;
    for v in vals {
        if !first {
            out.push(' ');
        }
        first = false;
        // `{}` on f64 is the shortest representation that parses back exactly.
        write!(out, "{v}").unwrap();
    }
    out.push('\n');
}

/// Writes `weights`/`biases` blocks for every layer.
fn write_params(out: &mut String, layers: &[(Array2<f64>, Array1<f64>)]) {
    for (i, (w, b)) in layers.iter().enumerate() {
        writeln!(out, "weights {i} {} {}", w.nrows(), w.ncols()).unwrap();
        for r in w.rows() {
            push_row(out, r.iter());
        }
        writeln!(out, "biases {i} {}", b.len()).unwrap();
        push_row(out, b.iter());
    }
}

/// Reads parameter blocks whose shapes must equal `shapes` (out, in).
fn read_params(lines: &mut Lines, shapes: &[(usize, usize)]) -> Result<Vec<(Array2<f64>, Array1<f64>)>> {
    let mut out = Vec::with_capacity(shapes.len());
    for (i, &(rows, cols)) in shapes.iter().enumerate() {
        let h = lines.keyed_usize("weights", 3)?;
        if h != [i, rows, cols] {
            return Err(lines.err(format!(
                "weights header {h:?} does not match layer {i} of shape {rows}×{cols}"
            )));
        }
        let mut flat = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            flat.extend(lines.values(cols)?);
        }
        let w = Array2::from_shape_vec((rows, cols), flat).expect("shape checked");
        let h = lines.keyed_usize("biases", 2)?;
        if h != [i, rows] {
            return Err(lines.err(format!("biases header {h:?} does not match layer {i}")));
        }
        let b = Array1::from_vec(lines.values(rows)?);
        out.push((w, b));
    }
    Ok(out)
}

fn shapes(net: &MlpNet) -> Vec<(usize, usize)> {
    net.layers().iter().map(|l| l.weights.dim()).collect()
}

impl MlpNet {
    pub fn to_checkpoint_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{NET_MAGIC}").unwrap();
        writeln!(out, "input {}", self.input_dim()).unwrap();
        writeln!(out, "layers {}", self.layers().len()).unwrap();
        for l in self.layers() {
            writeln!(out, "layer {} {}", l.out_dim(), l.activation.name()).unwrap();
        }
        let params: Vec<_> = self
            .layers()
            .iter()
            .map(|l| (l.weights.clone(), l.biases.clone()))
            .collect();
        write_params(&mut out, &params);
        out.push_str("end\n");
        out
    }

    pub fn from_checkpoint_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        let net = read_net(&mut lines)?;
        if let Ok(extra) = lines.next_line() {
            if !extra.is_empty() {
                return Err(lines.err("trailing data after `end`"));
            }
        }
        Ok(net)
    }

    pub fn save_params(&self, mut sink: impl Write) -> Result<()> {
        sink.write_all(self.to_checkpoint_text().as_bytes())?;
        Ok(())
    }

    pub fn load_params(mut source: impl Read) -> Result<Self> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        Self::from_checkpoint_text(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint_text(&std::fs::read_to_string(path)?)
    }
}

fn read_net(lines: &mut Lines) -> Result<MlpNet> {
    lines.expect(NET_MAGIC)?;
    let [input] = lines.keyed_usize("input", 1)?[..] else { unreachable!() };
    let [count] = lines.keyed_usize("layers", 1)?[..] else { unreachable!() };
    if count == 0 {
        return Err(lines.err("a network needs at least one layer"));
    }
    let mut specs = Vec::with_capacity(count);
    let mut prev = input;
    for _ in 0..count {
        let parts = lines.keyed("layer")?;
        let [width, act] = parts[..] else {
            return Err(lines.err("`layer` expects a width and an activation"));
        };
        let width: usize = width
            .parse()
            .map_err(|_| lines.err(format!("bad layer width `{width}`")))?;
        let act = Activation::from_name(act)
            .ok_or_else(|| lines.err(format!("unknown activation `{act}`")))?;
        specs.push(((width, prev), act));
        prev = width;
    }
    let shape_list: Vec<_> = specs.iter().map(|s| s.0).collect();
    let params = read_params(lines, &shape_list)?;
    lines.expect("end")?;
    let layers = params
        .into_iter()
        .zip(&specs)
        .map(|((weights, biases), &(_, activation))| Layer {
            weights,
            biases,
            activation,
        })
        .collect();
    MlpNet::from_layers(layers).map_err(|e| lines.err(e.to_string()))
}

impl Adam {
    /// Optimizer state; the matching network supplies the shapes on load.
    pub fn to_checkpoint_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{ADAM_MAGIC}").unwrap();
        writeln!(out, "lr {}", self.lr).unwrap();
        writeln!(out, "beta1 {}", self.beta1).unwrap();
        writeln!(out, "beta2 {}", self.beta2).unwrap();
        writeln!(out, "eps {}", self.eps).unwrap();
        writeln!(out, "step {}", self.t).unwrap();
        out.push_str("m\n");
        write_params(&mut out, &self.m.layers);
        out.push_str("v\n");
        write_params(&mut out, &self.v.layers);
        out.push_str("end\n");
        out
    }

    pub fn from_checkpoint_text(text: &str, net: &MlpNet) -> Result<Self> {
        let mut lines = Lines::new(text);
        lines.expect(ADAM_MAGIC)?;
        let lr = lines.keyed_f64("lr")?;
        let beta1 = lines.keyed_f64("beta1")?;
        let beta2 = lines.keyed_f64("beta2")?;
        let eps = lines.keyed_f64("eps")?;
        let [t] = lines.keyed_usize("step", 1)?[..] else { unreachable!() };
        let shapes = shapes(net);
        lines.expect("m")?;
        let m = read_params(&mut lines, &shapes)?;
        lines.expect("v")?;
        let v = read_params(&mut lines, &shapes)?;
        lines.expect("end")?;
        Ok(Self {
            lr,
            beta1,
            beta2,
            eps,
            t: t as u64,
            m: ParamGrads { layers: m },
            v: ParamGrads { layers: v },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, net: &MlpNet) -> Result<Self> {
        Self::from_checkpoint_text(&std::fs::read_to_string(path)?, net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> MlpNet {
        MlpNet::new(
            &[7, 16, 8, 8],
            &[Activation::Relu, Activation::Relu, Activation::Softmax],
            21,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let n = net();
        let back = MlpNet::from_checkpoint_text(&n.to_checkpoint_text()).unwrap();
        assert_eq!(back, n);
        let bits = |m: &MlpNet| m.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&n));
    }

    #[test]
    fn awkward_values_round_trip() {
        let mut n = MlpNet::zeros(&[2, 2], &[Activation::Linear]).unwrap();
        let vals = [0.1 + 0.2, -1e-300, 5e-324, 1.0 / 3.0, 123456789.123456789, -0.0];
        n.set_flat(&vals).unwrap();
        let back = MlpNet::from_checkpoint_text(&n.to_checkpoint_text()).unwrap();
        for (a, b) in back.to_flat().iter().zip(vals) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn io_round_trip() {
        let n = net();
        let mut buf = Vec::new();
        n.save_params(&mut buf).unwrap();
        assert_eq!(MlpNet::load_params(buf.as_slice()).unwrap(), n);
    }

    #[test]
    fn truncated_checkpoint_is_a_parse_error() {
        let text = net().to_checkpoint_text();
        let cut: String = text.lines().take(12).map(|l| format!("{l}\n")).collect();
        match MlpNet::from_checkpoint_text(&cut) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 13),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn payload_size_mismatch_is_a_parse_error() {
        let text = net().to_checkpoint_text();
        // Drop one value from the first weight row (line 8).
        let broken: String = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                if i == 7 {
                    let mut parts: Vec<_> = l.split(' ').collect();
                    parts.pop();
                    parts.join(" ") + "\n"
                } else {
                    format!("{l}\n")
                }
            })
            .collect();
        match MlpNet::from_checkpoint_text(&broken) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 8);
                assert!(message.contains("expected 7 values"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn header_mismatch_is_a_parse_error() {
        let text = net().to_checkpoint_text().replacen("layer 16 relu", "layer 17 relu", 1);
        assert!(matches!(MlpNet::from_checkpoint_text(&text), Err(Error::Parse { .. })));
        let text = net().to_checkpoint_text().replacen("relu", "tanh", 1);
        assert!(matches!(MlpNet::from_checkpoint_text(&text), Err(Error::Parse { line: 4, .. })));
        assert!(matches!(MlpNet::from_checkpoint_text("garbage"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn adam_round_trip() {
        let mut n = net();
        let mut opt = Adam::new(&n, 1e-3);
        let (_, cache) = n.forward(&[0.2; 7]).unwrap();
        let (g, _) = n.backward(cache, &[0.1, -0.3, 0.0, 0.2, 0.0, 0.0, 0.5, 0.1]).unwrap();
        opt.step(&mut n, &g).unwrap();
        opt.step(&mut n, &g).unwrap();
        let back = Adam::from_checkpoint_text(&opt.to_checkpoint_text(), &n).unwrap();
        assert_eq!(back, opt);
        let cut = opt.to_checkpoint_text().lines().take(20).collect::<Vec<_>>().join("\n");
        assert!(matches!(Adam::from_checkpoint_text(&cut, &n), Err(Error::Parse { .. })));
    }
}
