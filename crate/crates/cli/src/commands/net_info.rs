use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use sentivis_core::net::{load_weights, LayerKind, NetworkSpec};

use crate::args::NetInfoArgs;
use crate::error::{CliError, CliResult};

fn dims(shape: &[usize]) -> String {
    shape.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

fn describe(kind: &LayerKind) -> String {
    match kind {
        LayerKind::Convolution {
            out_channels,
            kernel,
            stride,
            pad,
            groups,
        } => format!("conv {out_channels}@{kernel}x{kernel} s{stride} p{pad} g{groups}"),
        LayerKind::Relu => "relu".into(),
        LayerKind::Lrn { size, .. } => format!("lrn n={size}"),
        LayerKind::MaxPool { window, stride } => format!("maxpool {window}x{window} s{stride}"),
        LayerKind::FullyConnected { out_features } => format!("fc {out_features}"),
        LayerKind::Softmax => "softmax".into(),
    }
}

pub fn net_info(args: &NetInfoArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let spec = match &args.net_spec {
        Some(p) => NetworkSpec::load(p)?,
        None => NetworkSpec::canonical(),
    };
    let mut text = String::new();
    let _ = writeln!(text, "input {}", dims(&spec.input_shape()));
    let rows: Vec<[String; 4]> = spec
        .layers()
        .iter()
        .zip(spec.shapes())
        .map(|(layer, shape)| {
            [
                layer.name.clone(),
                describe(&layer.kind),
                dims(&shape.output),
                shape.params.as_ref().map_or(0, |p| p.count()).to_string(),
            ]
        })
        .collect();
    let header = ["layer", "kind", "output", "params"];
    let widths: Vec<usize> = (0..4)
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let _ = writeln!(
        text,
        "{:<w0$}  {:<w1$}  {:>w2$}  {:>w3$}",
        header[0],
        header[1],
        header[2],
        header[3],
        w0 = widths[0],
        w1 = widths[1],
        w2 = widths[2],
        w3 = widths[3]
    );
    for r in &rows {
        let _ = writeln!(
            text,
            "{:<w0$}  {:<w1$}  {:>w2$}  {:>w3$}",
            r[0],
            r[1],
            r[2],
            r[3],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3]
        );
    }
    let total: usize = spec.shapes().iter().filter_map(|s| s.params.as_ref()).map(|p| p.count()).sum();
    let _ = writeln!(text, "total parameters {total}");
    if let Some(p) = &args.weights {
        let weights = load_weights(p)?;
        weights.validate(&spec)?;
        let _ = writeln!(text, "weights ok: {} tensors", weights.len());
    }
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))
}
