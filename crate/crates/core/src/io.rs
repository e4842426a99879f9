//! Delimited text files.
//!
//! Tables are CSV (`.csv`) or tab-separated (anything else) with a header
//! row. Lines starting with `#` are comments; writers put the producing
//! manifest's id there. Numbers are written in shortest round-trip form, so
//! reading a file back gives the exact `f64` values.
//!
//! * data: one column per variable, named in the header
//! * layer map: `vertex_name  layer_index`; any integer indices, ordered
//!   numerically; variables sharing an index share a layer
//! * graph: `src  dst  kind` with `kind ∈ {dir, undir}`
//! * scores: `src  dst  kind  g`
//! * parameters: `matrix  row  <names…>`, one row per `(B|K, vertex)`

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::data::Dataset;
use crate::datagen::MlggmParameters;
use crate::error::{Error, Result};
use crate::graph::{ChainGraph, Edge, EdgeKind, Layering};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn delimiter(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => b',',
        _ => b'\t',
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter(path))
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| Error::parse(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::parse(path, "missing header row"));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok(Table { header, rows })
}

/// Writes a table, preceded by `# manifest <tag>` when a tag is given.
pub fn write_table<S: AsRef<str>>(path: &Path, header: &[S], rows: &[Vec<String>], tag: Option<&str>) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    if let Some(tag) = tag {
        writeln!(file, "# manifest {tag}").map_err(|e| Error::io(path, e))?;
    }
    let mut writer = csv::WriterBuilder::new().delimiter(delimiter(path)).from_writer(file);
    let fail = |e: csv::Error| Error::parse(path, e.to_string());
    writer.write_record(header.iter().map(AsRef::as_ref)).map_err(fail)?;
    for row in rows {
        writer.write_record(row).map_err(fail)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Variable names in layer order, with their layering.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerMap {
    pub names: Vec<String>,
    pub layering: Layering,
}

impl LayerMap {
    pub fn new(names: Vec<String>, layering: Layering) -> Result<Self> {
        if names.len() != layering.p() {
            return Err(Error::DimensionMismatch(format!("{} names for {} vertices", names.len(), layering.p())));
        }
        Ok(Self { names, layering })
    }

    pub fn from_dataset(data: &Dataset) -> Self {
        Self { names: data.names().to_vec(), layering: data.layering().clone() }
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Reads a layer map. Vertices are ordered by layer, then by their order
/// in the file.
pub fn read_layer_map(path: &Path) -> Result<LayerMap> {
    let table = read_table(path)?;
    if table.header.len() < 2 {
        return Err(Error::parse(path, "expected columns vertex_name, layer_index"));
    }
    let mut entries: Vec<(String, i64)> = Vec::with_capacity(table.rows.len());
    for (r, row) in table.rows.iter().enumerate() {
        let (name, layer) = (row[0].clone(), &row[1]);
        let layer: i64 = layer
            .parse()
            .map_err(|_| Error::parse(path, format!("row {}: layer index `{layer}` is not an integer", r + 1)))?;
        if entries.iter().any(|(n, _)| *n == name) {
            return Err(Error::parse(path, format!("vertex `{name}` listed twice")));
        }
        entries.push((name, layer));
    }
    if entries.is_empty() {
        return Err(Error::parse(path, "no vertices"));
    }
    entries.sort_by_key(|&(_, l)| l);
    let mut groups: BTreeMap<i64, usize> = BTreeMap::new();
    for (_, l) in &entries {
        *groups.entry(*l).or_default() += 1;
    }
    let sizes: Vec<usize> = groups.values().copied().collect();
    LayerMap::new(entries.into_iter().map(|(n, _)| n).collect(), Layering::from_sizes(&sizes)?)
}

pub fn write_layer_map(path: &Path, map: &LayerMap, tag: Option<&str>) -> Result<()> {
    let rows: Vec<Vec<String>> = map
        .names
        .iter()
        .enumerate()
        .map(|(v, n)| vec![n.clone(), (map.layering.layer_of(v) + 1).to_string()])
        .collect();
    write_table(path, &["vertex_name", "layer_index"], &rows, tag)
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || ["na", "nan", "null"].contains(&cell.to_ascii_lowercase().as_str())
}

/// Reads a data table and a layer map into a centered dataset with columns
/// in layer order.
pub fn ingest(data_path: &Path, layer_path: &Path) -> Result<Dataset> {
    let map = read_layer_map(layer_path)?;
    let table = read_table(data_path)?;
    dataset_from_table(&table, &map, data_path)
}

pub fn dataset_from_table(table: &Table, map: &LayerMap, path: &Path) -> Result<Dataset> {
    let position: HashMap<&str, usize> = table.header.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
    if let Some(h) = table.header.iter().find(|h| map.index(h).is_none()) {
        return Err(Error::MissingColumnInLayerMap(h.clone()));
    }
    let columns = map
        .names
        .iter()
        .map(|n| position.get(n.as_str()).copied().ok_or_else(|| Error::parse(path, format!("no column `{n}`"))))
        .collect::<Result<Vec<usize>>>()?;
    let n = table.rows.len();
    let mut values = DMatrix::zeros(n, columns.len());
    for (r, row) in table.rows.iter().enumerate() {
        for (v, &c) in columns.iter().enumerate() {
            let column = || map.names[v].clone();
            let cell = row.get(c).map(String::as_str).unwrap_or("");
            if is_missing(cell) {
                return Err(Error::MissingValue { row: r + 1, column: column() });
            }
            values[(r, v)] = match cell.parse::<f64>() {
                Ok(x) if x.is_finite() => x,
                _ => return Err(Error::NonNumericCell { row: r + 1, column: column(), cell: cell.to_string() }),
            };
        }
    }
    if n < 2 {
        return Err(Error::ConfigInvalid(format!("need at least 2 observations, got {n}")));
    }
    for (v, col) in values.column_iter().enumerate() {
        if col.iter().all(|&x| x == col[0]) {
            return Err(Error::ConstantColumn(map.names[v].clone()));
        }
    }
    Ok(Dataset::new(map.names.clone(), map.layering.clone(), values)?.centered())
}

pub fn write_dataset(path: &Path, data: &Dataset, tag: Option<&str>) -> Result<()> {
    let rows: Vec<Vec<String>> = data.values().row_iter().map(|r| r.iter().map(|&x| num(x)).collect()).collect();
    write_table(path, data.names(), &rows, tag)
}

fn edge_cells(names: &[String], e: Edge) -> [String; 3] {
    let (a, b) = e.endpoints();
    [names[a].clone(), names[b].clone(), e.kind().as_str().to_string()]
}

fn parse_edge(map: &LayerMap, row: &[String], path: &Path) -> Result<Edge> {
    if row.len() < 3 {
        return Err(Error::parse(path, "expected columns src, dst, kind"));
    }
    let index = |name: &str| map.index(name).ok_or_else(|| Error::parse(path, format!("unknown vertex `{name}`")));
    let (a, b) = (index(&row[0])?, index(&row[1])?);
    match row[2].as_str() {
        k if k == EdgeKind::Dir.as_str() => Ok(Edge::directed(a, b)),
        k if k == EdgeKind::Undir.as_str() => Ok(Edge::undirected(a, b)),
        other => Err(Error::parse(path, format!("edge kind `{other}` is neither dir nor undir"))),
    }
}

pub fn write_graph(path: &Path, names: &[String], edges: &[Edge], tag: Option<&str>) -> Result<()> {
    let rows: Vec<Vec<String>> = edges.iter().map(|&e| edge_cells(names, e).to_vec()).collect();
    write_table(path, &["src", "dst", "kind"], &rows, tag)
}

/// Reads and validates a graph against the layer map.
pub fn read_graph(path: &Path, map: &LayerMap) -> Result<ChainGraph> {
    let table = read_table(path)?;
    let edges = table.rows.iter().map(|r| parse_edge(map, r, path)).collect::<Result<Vec<_>>>()?;
    ChainGraph::new(map.layering.clone(), edges)
}

/// Edge scores from the column named `g` (or `score`, or the fourth column).
pub fn read_scores(path: &Path, map: &LayerMap) -> Result<Vec<(Edge, f64)>> {
    let table = read_table(path)?;
    let col = table.column("g").or_else(|| table.column("score")).unwrap_or(3);
    table
        .rows
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let e = parse_edge(map, row, path)?;
            let cell = row.get(col).ok_or_else(|| Error::parse(path, format!("row {}: no score", r + 1)))?;
            let g = cell.parse().map_err(|_| Error::parse(path, format!("row {}: score `{cell}`", r + 1)))?;
            Ok((e, g))
        })
        .collect()
}

pub fn write_scores(path: &Path, names: &[String], scores: &[(Edge, f64)], tag: Option<&str>) -> Result<()> {
    let rows: Vec<Vec<String>> = scores
        .iter()
        .map(|&(e, g)| {
            let mut row = edge_cells(names, e).to_vec();
            row.push(num(g));
            row
        })
        .collect();
    write_table(path, &["src", "dst", "kind", "g"], &rows, tag)
}

pub fn write_params(path: &Path, names: &[String], params: &MlggmParameters, tag: Option<&str>) -> Result<()> {
    let mut header = vec!["matrix".to_string(), "row".to_string()];
    header.extend(names.iter().cloned());
    let mut rows = Vec::new();
    for (label, m) in [("B", params.b()), ("K", params.k())] {
        for (v, r) in m.row_iter().enumerate() {
            let mut row = vec![label.to_string(), names[v].clone()];
            row.extend(r.iter().map(|&x| num(x)));
            rows.push(row);
        }
    }
    write_table(path, &header, &rows, tag)
}

pub fn read_params(path: &Path, map: &LayerMap) -> Result<MlggmParameters> {
    let table = read_table(path)?;
    let p = map.names.len();
    if table.header.len() != p + 2 || table.header[2..] != map.names[..] {
        return Err(Error::parse(path, "parameter columns do not match the layer map"));
    }
    let mut b = DMatrix::zeros(p, p);
    let mut k = DMatrix::zeros(p, p);
    for row in &table.rows {
        let target = match row[0].as_str() {
            "B" => &mut b,
            "K" => &mut k,
            other => return Err(Error::parse(path, format!("unknown matrix `{other}`"))),
        };
        let v = map.index(&row[1]).ok_or_else(|| Error::parse(path, format!("unknown vertex `{}`", row[1])))?;
        for (w, cell) in row[2..].iter().enumerate() {
            target[(v, w)] = cell.parse().map_err(|_| Error::parse(path, format!("bad number `{cell}`")))?;
        }
    }
    MlggmParameters::new(map.layering.clone(), b, k)
}
