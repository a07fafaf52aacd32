//! Map-spec documents: one TOML file per map with a `kind` discriminator.
//!
//! ```toml
//! kind = "matrix"
//! rows = [[2.0, 1.0], [1.0, 2.0]]
//! ```
//!
//! | kind      | keys |
//! |-----------|------|
//! | `matrix`  | `rows` |
//! | `tensor`  | `order`, `dim`, `entries = [{ index = [i₁, …], value = v }, …]` (1-indexed), or `file` in the tensor text format |
//! | `expr`    | `dim`, `coords`: one expression per coordinate |
//! | `builtin` | `name = "example1"` or `"example2"` |
//! | `topical` | `coords`, or `table` / `table_file` in the action-table text format |
//!
//! Expressions are nested arrays whose first element names the node:
//! `["mono", c, [α₁, …, α_n]]`, `["var", j]` or `["var", j, c]` (1-indexed),
//! `["sum", …]`, `["max", …]`, `["min", …]`. Topical coordinates use
//! `["affine", [a₁, …, a_n], b]`, `["var", j]` / `["var", j, b]`,
//! `["const", b]`, `["max", …]`, `["min", …]` and `["lse", …]`.
//!
//! [`to_toml`] writes the normalized form: tensors inline, tables as
//! coordinate expressions, `var` nodes expanded.

use std::path::Path;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::maps::{BuiltinMap, Expr, ExprMap, MapModel, MatrixMap, TensorEntry, TensorMap};
use crate::topical::{TopicalExpr, TopicalMap};

#[derive(Debug, Clone, PartialEq)]
pub enum MapSpec {
    Model(MapModel),
    Topical(TopicalMap),
}

impl MapSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            MapSpec::Model(m) => m.kind(),
            MapSpec::Topical(_) => "topical",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MapSpec::Model(m) => m.dim(),
            MapSpec::Topical(t) => t.dim(),
        }
    }
}

/// Parses a document. Relative `file` / `table_file` paths are resolved
/// against `base_dir` when given.
pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<MapSpec> {
    let doc: Table = text.parse().map_err(|e: toml::de::Error| {
        let (line, col) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        Error::Parse { line, message: format!("column {col}: {}", e.message()) }
    })?;
    let kind = get_str(&doc, "kind")?;
    let read = |name: &str| -> Result<String> {
        let p = base_dir.map_or_else(|| Path::new(name).to_path_buf(), |b| b.join(name));
        std::fs::read_to_string(&p).map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", p.display())))
    };
    match kind {
        "matrix" => {
            let rows = get_array(&doc, "rows")?
                .iter()
                .enumerate()
                .map(|(i, r)| float_list(r, &format!("rows[{}]", i + 1)))
                .collect::<Result<Vec<_>>>()?;
            Ok(MapSpec::Model(MatrixMap::from_rows(rows)?.into()))
        }
        "tensor" => {
            if let Some(file) = doc.get("file") {
                let name = file.as_str().ok_or_else(|| schema("file must be a string"))?;
                return Ok(MapSpec::Model(TensorMap::parse_text(&read(name)?)?.into()));
            }
            let order = get_usize(&doc, "order")?;
            let dim = get_usize(&doc, "dim")?;
            let entries = get_array(&doc, "entries")?
                .iter()
                .enumerate()
                .map(|(k, e)| tensor_entry(e, dim, k + 1))
                .collect::<Result<Vec<_>>>()?;
            Ok(MapSpec::Model(TensorMap::new(order, dim, entries)?.into()))
        }
        "expr" => {
            let dim = get_usize(&doc, "dim")?;
            let coords = get_array(&doc, "coords")?
                .iter()
                .enumerate()
                .map(|(i, c)| expr_node(c, dim, &format!("coords[{}]", i + 1)))
                .collect::<Result<Vec<_>>>()?;
            if coords.len() != dim {
                return Err(schema(&format!("coords has {} entries, expected dim = {dim}", coords.len())));
            }
            Ok(MapSpec::Model(ExprMap::new(coords)?.into()))
        }
        "builtin" => Ok(MapSpec::Model(get_str(&doc, "name")?.parse::<BuiltinMap>()?.into())),
        "topical" => {
            if let Some(t) = doc.get("table") {
                let text = t.as_str().ok_or_else(|| schema("table must be a string"))?;
                return Ok(MapSpec::Topical(TopicalMap::parse_table(text)?));
            }
            if let Some(f) = doc.get("table_file") {
                let name = f.as_str().ok_or_else(|| schema("table_file must be a string"))?;
                return Ok(MapSpec::Topical(TopicalMap::parse_table(&read(name)?)?));
            }
            let raw = get_array(&doc, "coords")?;
            let dim = raw.len();
            let coords = raw
                .iter()
                .enumerate()
                .map(|(i, c)| topical_node(c, dim, &format!("coords[{}]", i + 1)))
                .collect::<Result<Vec<_>>>()?;
            Ok(MapSpec::Topical(TopicalMap::from_exprs(coords)?))
        }
        other => Err(schema(&format!(
            "unknown kind {other:?}; expected matrix, tensor, expr, builtin or topical"
        ))),
    }
}

/// Reads and parses a document from disk.
pub fn load(path: &Path) -> Result<(MapSpec, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    let spec = parse(&text, path.parent())?;
    Ok((spec, text))
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn schema(msg: &str) -> Error {
    Error::InvalidModel(msg.to_string())
}

fn get_str<'a>(doc: &'a Table, key: &str) -> Result<&'a str> {
    doc.get(key).and_then(Value::as_str).ok_or_else(|| schema(&format!("missing string key {key:?}")))
}

fn get_usize(doc: &Table, key: &str) -> Result<usize> {
    doc.get(key)
        .and_then(Value::as_integer)
        .and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| schema(&format!("missing nonnegative integer key {key:?}")))
}

fn get_array<'a>(doc: &'a Table, key: &str) -> Result<&'a Vec<Value>> {
    doc.get(key).and_then(Value::as_array).ok_or_else(|| schema(&format!("missing array key {key:?}")))
}

fn number(v: &Value, path: &str) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(schema(&format!("{path}: expected a number"))),
    }
}

fn index(v: &Value, dim: usize, path: &str) -> Result<usize> {
    let i = v.as_integer().ok_or_else(|| schema(&format!("{path}: expected an integer index")))?;
    if i < 1 || i as usize > dim {
        return Err(schema(&format!("{path}: index {i} out of range 1..={dim}")));
    }
    Ok(i as usize - 1)
}

fn float_list(v: &Value, path: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| schema(&format!("{path}: expected an array of numbers")))?
        .iter()
        .enumerate()
        .map(|(k, x)| number(x, &format!("{path}[{}]", k + 1)))
        .collect()
}

fn tensor_entry(v: &Value, dim: usize, k: usize) -> Result<TensorEntry> {
    let path = format!("entries[{k}]");
    let t = v.as_table().ok_or_else(|| schema(&format!("{path}: expected {{ index = [...], value = ... }}")))?;
    let idx = t
        .get("index")
        .and_then(Value::as_array)
        .ok_or_else(|| schema(&format!("{path}: missing index")))?
        .iter()
        .map(|i| index(i, dim, &path))
        .collect::<Result<Vec<_>>>()?;
    let value = number(t.get("value").ok_or_else(|| schema(&format!("{path}: missing value")))?, &path)?;
    Ok(TensorEntry { index: idx, value })
}

fn node_parts<'a>(v: &'a Value, path: &str) -> Result<(&'a str, &'a [Value])> {
    let arr = v.as_array().ok_or_else(|| schema(&format!("{path}: expected a node array")))?;
    let head = arr.first().and_then(Value::as_str).ok_or_else(|| schema(&format!("{path}: node must start with its name")))?;
    Ok((head, &arr[1..]))
}

fn children<T>(args: &[Value], path: &str, f: impl Fn(&Value, &str) -> Result<T>) -> Result<Vec<T>> {
    if args.is_empty() {
        return Err(schema(&format!("{path}: node has no children")));
    }
    args.iter().enumerate().map(|(k, c)| f(c, &format!("{path}[{}]", k + 1))).collect()
}

fn expr_node(v: &Value, dim: usize, path: &str) -> Result<Expr> {
    let (head, args) = node_parts(v, path)?;
    match head {
        "mono" => {
            let [c, e] = args else { return Err(schema(&format!("{path}: expected [\"mono\", c, [exponents]]"))) };
            Ok(Expr::Monomial { coef: number(c, path)?, exps: float_list(e, path)? })
        }
        "var" => match args {
            [j] => Ok(Expr::var(dim, index(j, dim, path)?, 1.0)),
            [j, c] => Ok(Expr::var(dim, index(j, dim, path)?, number(c, path)?)),
            _ => Err(schema(&format!("{path}: expected [\"var\", j] or [\"var\", j, c]"))),
        },
        "sum" => Ok(Expr::Sum(children(args, path, |c, p| expr_node(c, dim, p))?)),
        "max" => Ok(Expr::Max(children(args, path, |c, p| expr_node(c, dim, p))?)),
        "min" => Ok(Expr::Min(children(args, path, |c, p| expr_node(c, dim, p))?)),
        other => Err(schema(&format!("{path}: unknown node {other:?}"))),
    }
}

fn topical_node(v: &Value, dim: usize, path: &str) -> Result<TopicalExpr> {
    let (head, args) = node_parts(v, path)?;
    match head {
        "affine" => {
            let [a, b] = args else { return Err(schema(&format!("{path}: expected [\"affine\", [coefficients], b]"))) };
            Ok(TopicalExpr::affine(float_list(a, path)?, number(b, path)?))
        }
        "var" => match args {
            [j] => Ok(TopicalExpr::var(dim, index(j, dim, path)?, 0.0)),
            [j, b] => Ok(TopicalExpr::var(dim, index(j, dim, path)?, number(b, path)?)),
            _ => Err(schema(&format!("{path}: expected [\"var\", j] or [\"var\", j, b]"))),
        },
        "const" => {
            let [b] = args else { return Err(schema(&format!("{path}: expected [\"const\", b]"))) };
            Ok(TopicalExpr::constant(dim, number(b, path)?))
        }
        "max" => Ok(TopicalExpr::Max(children(args, path, |c, p| topical_node(c, dim, p))?)),
        "min" => Ok(TopicalExpr::Min(children(args, path, |c, p| topical_node(c, dim, p))?)),
        "lse" => Ok(TopicalExpr::LogSumExp(children(args, path, |c, p| topical_node(c, dim, p))?)),
        other => Err(schema(&format!("{path}: unknown node {other:?}"))),
    }
}

fn floats(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| Value::Float(x)).collect())
}

fn node(head: &str, rest: impl IntoIterator<Item = Value>) -> Value {
    let mut arr = vec![Value::String(head.to_string())];
    arr.extend(rest);
    Value::Array(arr)
}

fn expr_value(e: &Expr) -> Value {
    match e {
        Expr::Monomial { coef, exps } => node("mono", [Value::Float(*coef), floats(exps)]),
        Expr::Sum(c) => node("sum", c.iter().map(expr_value)),
        Expr::Max(c) => node("max", c.iter().map(expr_value)),
        Expr::Min(c) => node("min", c.iter().map(expr_value)),
    }
}

fn topical_value(e: &TopicalExpr) -> Value {
    match e {
        TopicalExpr::Affine { coeffs, offset } => node("affine", [floats(coeffs), Value::Float(*offset)]),
        TopicalExpr::Max(c) => node("max", c.iter().map(topical_value)),
        TopicalExpr::Min(c) => node("min", c.iter().map(topical_value)),
        TopicalExpr::LogSumExp(c) => node("lse", c.iter().map(topical_value)),
    }
}

/// The normalized document for `spec`.
pub fn to_toml(spec: &MapSpec) -> String {
    let mut doc = Table::new();
    doc.insert("kind".into(), Value::String(spec.kind().into()));
    match spec {
        MapSpec::Model(MapModel::Matrix(m)) => {
            doc.insert("rows".into(), Value::Array(m.matrix().rows().iter().map(|r| floats(r)).collect()));
        }
        MapSpec::Model(MapModel::Tensor(t)) => {
            doc.insert("order".into(), Value::Integer(t.order() as i64));
            doc.insert("dim".into(), Value::Integer(t.dim() as i64));
            let entries = t
                .entries()
                .iter()
                .map(|e| {
                    let mut tab = Table::new();
                    tab.insert("index".into(), Value::Array(e.index.iter().map(|&i| Value::Integer(i as i64 + 1)).collect()));
                    tab.insert("value".into(), Value::Float(e.value));
                    Value::Table(tab)
                })
                .collect();
            doc.insert("entries".into(), Value::Array(entries));
        }
        MapSpec::Model(MapModel::Expr(e)) => {
            doc.insert("dim".into(), Value::Integer(e.dim() as i64));
            doc.insert("coords".into(), Value::Array(e.coords().iter().map(expr_value).collect()));
        }
        MapSpec::Model(MapModel::Builtin(b)) => {
            doc.insert("name".into(), Value::String(b.tag().into()));
        }
        MapSpec::Topical(t) => {
            doc.insert("coords".into(), Value::Array(t.coords().iter().map(topical_value).collect()));
        }
    }
    toml::to_string(&doc).expect("plain tables serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::PositiveVector;

    fn model(text: &str) -> MapModel {
        match parse(text, None).unwrap() {
            MapSpec::Model(m) => m,
            MapSpec::Topical(_) => panic!("expected a model"),
        }
    }

    #[test]
    fn matrix_document() {
        let m = model("kind = \"matrix\"\nrows = [[2, 1.0], [1.0, 2]]\n");
        assert_eq!(m, MapModel::matrix(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap());
    }

    #[test]
    fn tensor_document() {
        let text = r#"
kind = "tensor"
order = 3
dim = 2
entries = [
  { index = [1, 1, 1], value = 1.0 },
  { index = [1, 2, 2], value = 2.0 },
  { index = [2, 1, 2], value = 1.0 },
]
"#;
        let m = model(text);
        let y = m.eval(&PositiveVector::ones(2)).unwrap();
        assert!((y[0] - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn expr_document() {
        let text = r#"
kind = "expr"
dim = 2
coords = [
  ["max", ["var", 1], ["var", 2]],
  ["mono", 1.0, [0.5, 0.5]],
]
"#;
        let MapModel::Expr(e) = model(text) else { panic!() };
        let t = e.log_conjugate();
        assert_eq!(t.eval(&[1.0, 3.0]).unwrap(), vec![3.0, 2.0]);
    }

    #[test]
    fn builtin_and_topical_documents() {
        assert_eq!(model("kind = \"builtin\"\nname = \"example2\"\n"), MapModel::Builtin(BuiltinMap::ArctanMax));
        let text = r#"
kind = "topical"
coords = [
  ["max", ["var", 1, 2.0], ["var", 2]],
  ["max", ["var", 1], ["var", 2, 1.0]],
]
"#;
        let MapSpec::Topical(t) = parse(text, None).unwrap() else { panic!() };
        assert_eq!(t.eval(&[2.0, 1.0]).unwrap(), vec![4.0, 2.0]);
        let table = "kind = \"topical\"\ntable = \"\"\"\n1; a; 0; 1 0\n2; a; 1; 1 0\n\"\"\"\n";
        let MapSpec::Topical(t) = parse(table, None).unwrap() else { panic!() };
        assert_eq!(t.eval(&[0.0, 5.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn parse_errors_report_position() {
        let err = parse("kind = \"matrix\"\nrows = [[1, 2], [3, \n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2.., .. }), "{err:?}");
        assert!(matches!(parse("kind = \"cube\"\n", None), Err(Error::InvalidModel(_))));
        assert!(matches!(parse("kind = \"matrix\"\nrows = [[0, 0], [1, 1]]\n", None), Err(Error::InvalidModel(_))));
        assert!(parse("kind = \"expr\"\ndim = 2\ncoords = [[\"var\", 3], [\"var\", 1]]\n", None).is_err());
    }

    #[test]
    fn normalization_is_idempotent() {
        let docs = [
            "kind = \"matrix\"\nrows = [[2, 1], [1, 2]]\n",
            "kind = \"tensor\"\norder = 2\ndim = 1\nentries = [{ index = [1, 1], value = 1 }, { index = [1, 1], value = 2 }]\n",
            "kind = \"expr\"\ndim = 2\ncoords = [[\"min\", [\"var\", 1], [\"var\", 2]], [\"var\", 2]]\n",
            "kind = \"builtin\"\nname = \"arctan-averaging\"\n",
            "kind = \"topical\"\ncoords = [[\"min\", [\"var\", 2], [\"const\", 1]], [\"lse\", [\"var\", 1], [\"var\", 2]]]\n",
        ];
        for d in docs {
            let once = to_toml(&parse(d, None).unwrap());
            let twice = to_toml(&parse(&once, None).unwrap());
            assert_eq!(once, twice, "{d}");
            assert_eq!(parse(&once, None).unwrap(), parse(d, None).unwrap());
        }
    }
}
