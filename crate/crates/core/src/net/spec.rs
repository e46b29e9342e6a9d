//! Declarative network topology and its text format.
//!
//! ```text
//! # comment
//! input channels=3 height=224 width=224
//! layer name=conv1 kind=convolution out_channels=96 kernel=11 stride=4 pad=0 groups=1
//! layer name=relu1 kind=relu
//! layer name=norm1 kind=lrn n=5 k=2 alpha=0.0001 beta=0.75
//! layer name=pool1 kind=maxpool window=3 stride=2
//! layer name=fc6 kind=fullyconnected out_features=4096
//! layer name=prob kind=softmax
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::layers::window_extent;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum LayerKind {
    Convolution {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        groups: usize,
    },
    Relu,
    Lrn {
        size: usize,
        k: f32,
        alpha: f32,
        beta: f32,
    },
    MaxPool {
        window: usize,
        stride: usize,
    },
    FullyConnected {
        out_features: usize,
    },
    Softmax,
}

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Convolution { .. } => "convolution",
            LayerKind::Relu => "relu",
            LayerKind::Lrn { .. } => "lrn",
            LayerKind::MaxPool { .. } => "maxpool",
            LayerKind::FullyConnected { .. } => "fullyconnected",
            LayerKind::Softmax => "softmax",
        }
    }

    /// Elementwise activations; a tap on a layer extends through these.
    pub fn is_activation(&self) -> bool {
        matches!(self, LayerKind::Relu | LayerKind::Softmax)
    }

    pub fn has_weights(&self) -> bool {
        matches!(
            self,
            LayerKind::Convolution { .. } | LayerKind::FullyConnected { .. }
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
}

/// Shapes of a layer's learnable blobs, given its input shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamShapes {
    pub weights: Vec<usize>,
    pub bias: Vec<usize>,
}

impl ParamShapes {
    pub fn count(&self) -> usize {
        self.weights.iter().product::<usize>() + self.bias.iter().product::<usize>()
    }
}

/// Per-layer input/output shapes of a validated topology.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerShape {
    pub input: Vec<usize>,
    pub output: Vec<usize>,
    pub params: Option<ParamShapes>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    input: [usize; 3],
    layers: Vec<LayerSpec>,
    shapes: Vec<LayerShape>,
}

const CANONICAL: &str = include_str!("../../nets/canonical.net");

impl NetworkSpec {
    /// Validates names and the shape chain.
    pub fn new(input: [usize; 3], layers: Vec<LayerSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for l in &layers {
            if !seen.insert(l.name.as_str()) {
                return Err(Error::invalid(format!("duplicate layer name {:?}", l.name)));
            }
        }
        let shapes = shape_chain(input, &layers)?;
        Ok(NetworkSpec {
            input,
            layers,
            shapes,
        })
    }

    /// The shipped 5-convolution, 3-fully-connected topology on 224x224 RGB.
    pub fn canonical() -> Self {
        CANONICAL
            .parse()
            .expect("shipped canonical network spec parses")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_spec(&text, &path.display().to_string())
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    /// Index of the layer whose output a tap on `name` reports: the named
    /// layer followed by any directly following activations.
    pub fn tap_end(&self, name: &str) -> Result<usize> {
        let mut i = self
            .index_of(name)
            .ok_or_else(|| Error::invalid(format!("tap {name:?} is not a layer of the network")))?;
        while i + 1 < self.layers.len() && self.layers[i + 1].kind.is_activation() {
            i += 1;
        }
        Ok(i)
    }

    /// Flattened length of a tap's output.
    pub fn tap_dim(&self, name: &str) -> Result<usize> {
        let end = self.tap_end(name)?;
        Ok(self.shapes[end].output.iter().product())
    }

    pub fn output_shape(&self) -> Vec<usize> {
        self.shapes
            .last()
            .map(|s| s.output.clone())
            .unwrap_or_else(|| self.input.to_vec())
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [c, h, w] = self.input;
        writeln!(f, "input channels={c} height={h} width={w}")?;
        for l in &self.layers {
            write!(f, "layer name={} kind={}", l.name, l.kind.name())?;
            match &l.kind {
                LayerKind::Convolution {
                    out_channels,
                    kernel,
                    stride,
                    pad,
                    groups,
                } => write!(
                    f,
                    " out_channels={out_channels} kernel={kernel} stride={stride} pad={pad} groups={groups}"
                )?,
                LayerKind::Lrn {
                    size,
                    k,
                    alpha,
                    beta,
                } => write!(f, " n={size} k={k} alpha={alpha} beta={beta}")?,
                LayerKind::MaxPool { window, stride } => {
                    write!(f, " window={window} stride={stride}")?
                }
                LayerKind::FullyConnected { out_features } => {
                    write!(f, " out_features={out_features}")?
                }
                LayerKind::Relu | LayerKind::Softmax => {}
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl FromStr for NetworkSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_spec(s, "<network spec>")
    }
}

fn shape_chain(input: [usize; 3], layers: &[LayerSpec]) -> Result<Vec<LayerShape>> {
    if input.contains(&0) {
        return Err(Error::shape(format!("input shape {input:?} has a zero dimension")));
    }
    let mut current = input.to_vec();
    let mut prev_name = "input".to_string();
    let mut out = Vec::with_capacity(layers.len());
    for l in layers {
        let fail = |msg: String| {
            Error::shape(format!(
                "layer {:?} cannot follow {:?}: {msg}",
                l.name, prev_name
            ))
        };
        let spatial = |cur: &[usize]| match cur {
            [c, h, w] => Ok((*c, *h, *w)),
            _ => Err(fail(format!(
                "{} needs a [C, H, W] input, got {cur:?}",
                l.kind.name()
            ))),
        };
        let (output, params) = match &l.kind {
            LayerKind::Convolution {
                out_channels,
                kernel,
                stride,
                pad,
                groups,
            } => {
                let (c, h, w) = spatial(&current)?;
                if c % groups != 0 || out_channels % groups != 0 {
                    return Err(fail(format!(
                        "groups={groups} must divide {c} input and {out_channels} output channels"
                    )));
                }
                match (
                    window_extent(h, *pad, *kernel, *stride),
                    window_extent(w, *pad, *kernel, *stride),
                ) {
                    (Some(oh), Some(ow)) => (
                        vec![*out_channels, oh, ow],
                        Some(ParamShapes {
                            weights: vec![*out_channels, c / groups, *kernel, *kernel],
                            bias: vec![*out_channels],
                        }),
                    ),
                    _ => {
                        return Err(fail(format!(
                            "kernel {kernel} with pad {pad} does not fit {h}x{w}"
                        )))
                    }
                }
            }
            LayerKind::MaxPool { window, stride } => {
                let (c, h, w) = spatial(&current)?;
                match (
                    window_extent(h, 0, *window, *stride),
                    window_extent(w, 0, *window, *stride),
                ) {
                    (Some(oh), Some(ow)) => (vec![c, oh, ow], None),
                    _ => return Err(fail(format!("window {window} exceeds {h}x{w}"))),
                }
            }
            LayerKind::Lrn { .. } => {
                spatial(&current)?;
                (current.clone(), None)
            }
            LayerKind::Relu => (current.clone(), None),
            LayerKind::Softmax => {
                if current.len() != 1 {
                    return Err(fail(format!(
                        "softmax needs a vector input, got {current:?}"
                    )));
                }
                (current.clone(), None)
            }
            LayerKind::FullyConnected { out_features } => {
                let n_in: usize = current.iter().product();
                (
                    vec![*out_features],
                    Some(ParamShapes {
                        weights: vec![*out_features, n_in],
                        bias: vec![*out_features],
                    }),
                )
            }
        };
        out.push(LayerShape {
            input: current,
            output: output.clone(),
            params,
        });
        current = output;
        prev_name = l.name.clone();
    }
    Ok(out)
}

fn parse_spec(text: &str, source: &str) -> Result<NetworkSpec> {
    let mut input = None;
    let mut layers = Vec::new();
    let mut names: BTreeMap<String, usize> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::format(source, format!("line {lineno}"), msg);
        let mut parts = line.split_whitespace();
        let head = parts.next().unwrap_or_default();
        let mut fields = KeyValues::parse(parts, &err)?;
        match head {
            "input" => {
                if input.is_some() {
                    return Err(err("input declared twice".into()));
                }
                let shape = [
                    fields.required::<usize>("channels", &err)?,
                    fields.required::<usize>("height", &err)?,
                    fields.required::<usize>("width", &err)?,
                ];
                fields.finish(&err)?;
                input = Some(shape);
            }
            "layer" => {
                let name: String = fields.required("name", &err)?;
                if let Some(first) = names.insert(name.clone(), lineno) {
                    return Err(err(format!(
                        "layer name {name:?} already used on line {first}"
                    )));
                }
                let kind_name: String = fields.required("kind", &err)?;
                let kind = match kind_name.as_str() {
                    "convolution" => LayerKind::Convolution {
                        out_channels: fields.required("out_channels", &err)?,
                        kernel: fields.required("kernel", &err)?,
                        stride: fields.optional("stride", 1, &err)?,
                        pad: fields.optional("pad", 0, &err)?,
                        groups: fields.optional("groups", 1, &err)?,
                    },
                    "relu" => LayerKind::Relu,
                    "lrn" => LayerKind::Lrn {
                        size: fields.optional("n", 5, &err)?,
                        k: fields.optional("k", 2.0, &err)?,
                        alpha: fields.optional("alpha", 1e-4, &err)?,
                        beta: fields.optional("beta", 0.75, &err)?,
                    },
                    "maxpool" => LayerKind::MaxPool {
                        window: fields.required("window", &err)?,
                        stride: fields.required("stride", &err)?,
                    },
                    "fullyconnected" => LayerKind::FullyConnected {
                        out_features: fields.required("out_features", &err)?,
                    },
                    "softmax" => LayerKind::Softmax,
                    other => return Err(err(format!("unknown layer kind {other:?}"))),
                };
                fields.finish(&err)?;
                check_params(&kind).map_err(err)?;
                layers.push(LayerSpec { name, kind });
            }
            other => return Err(err(format!("expected `input` or `layer`, found {other:?}"))),
        }
    }
    let input = input.ok_or_else(|| Error::format(source, "end of file", "missing input line"))?;
    NetworkSpec::new(input, layers)
}

fn check_params(kind: &LayerKind) -> std::result::Result<(), String> {
    match *kind {
        LayerKind::Convolution {
            out_channels,
            kernel,
            stride,
            groups,
            ..
        } => {
            if out_channels == 0 || kernel == 0 || stride == 0 || groups == 0 {
                return Err("out_channels, kernel, stride and groups must be at least 1".into());
            }
        }
        LayerKind::MaxPool { window, stride } => {
            if window == 0 || stride == 0 {
                return Err("window and stride must be at least 1".into());
            }
        }
        LayerKind::Lrn { size, .. } => {
            if size % 2 == 0 {
                return Err(format!("lrn n must be odd, got {size}"));
            }
        }
        LayerKind::FullyConnected { out_features } => {
            if out_features == 0 {
                return Err("out_features must be at least 1".into());
            }
        }
        LayerKind::Relu | LayerKind::Softmax => {}
    }
    Ok(())
}

struct KeyValues<'a> {
    map: Vec<(&'a str, &'a str, bool)>,
}

impl<'a> KeyValues<'a> {
    fn parse(
        parts: impl Iterator<Item = &'a str>,
        err: &dyn Fn(String) -> Error,
    ) -> Result<Self> {
        let mut map: Vec<(&str, &str, bool)> = Vec::new();
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, found {p:?}")))?;
            if map.iter().any(|(seen, _, _)| *seen == k) {
                return Err(err(format!("key {k:?} given twice")));
            }
            map.push((k, v, false));
        }
        Ok(KeyValues { map })
    }

    fn take(&mut self, key: &str) -> Option<&'a str> {
        self.map.iter_mut().find(|(k, _, _)| *k == key).map(|e| {
            e.2 = true;
            e.1
        })
    }

    fn required<T: FromStr>(&mut self, key: &str, err: &dyn Fn(String) -> Error) -> Result<T> {
        let v = self
            .take(key)
            .ok_or_else(|| err(format!("missing key {key:?}")))?;
        v.parse()
            .map_err(|_| err(format!("bad value {v:?} for {key:?}")))
    }

    fn optional<T: FromStr>(
        &mut self,
        key: &str,
        default: T,
        err: &dyn Fn(String) -> Error,
    ) -> Result<T> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| err(format!("bad value {v:?} for {key:?}"))),
        }
    }

    fn finish(self, err: &dyn Fn(String) -> Error) -> Result<()> {
        match self.map.iter().find(|(_, _, used)| !used) {
            Some((k, _, _)) => Err(err(format!("unknown key {k:?}"))),
            None => Ok(()),
        }
    }
}
