//! JSON files for instances and solutions, and the results CSV.
//!
//! All indices in files are 0-based. Sequence files name orders and racks by
//! their instance index and carry the supply each rack offers the picker.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{Allocation, Draw};
use crate::instance::{Instance, InstanceError, Units};
use crate::sequencing::{Pick, SequenceSolution, SequencingError, SequencingInstance, SequencingMode};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Sequencing(#[from] SequencingError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> IoError {
    IoError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LineFile {
    pub product: i64,
    pub units: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OrderFile {
    pub lines: Vec<LineFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RackFile {
    pub supply: Vec<LineFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PickerFile {
    pub capacity: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default)]
    pub name: String,
    pub num_products: i64,
    pub orders: Vec<OrderFile>,
    pub racks: Vec<RackFile>,
    pub pickers: Vec<PickerFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_groups: Option<Vec<Vec<i64>>>,
}

fn parse<T: DeserializeOwned>(text: &str) -> Result<T, IoError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema(path, e.into_inner().to_string())
    })
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serialises");
    text.push('\n');
    text
}

fn index(value: i64, limit: usize, path: &str, what: &str) -> Result<usize, IoError> {
    if value < 0 || value as u64 >= limit as u64 {
        return Err(schema(path, format!("{what} {value} outside 0..{limit}")));
    }
    Ok(value as usize)
}

fn unit_map(lines: &[LineFile], num_products: usize, path: &str, min_units: i64) -> Result<Units, IoError> {
    let mut map = Units::new();
    for (at, line) in lines.iter().enumerate() {
        let here = format!("{path}[{at}]");
        let product = index(line.product, num_products, &format!("{here}.product"), "product")?;
        if line.units < min_units || line.units > u32::MAX as i64 {
            return Err(schema(format!("{here}.units"), format!("units {} must be at least {min_units}", line.units)));
        }
        if map.contains_key(&product) {
            return Err(schema(format!("{here}.product"), format!("product {product} listed twice")));
        }
        if line.units > 0 {
            map.insert(product, line.units as u32);
        }
    }
    Ok(map)
}

fn lines_of(units: &Units) -> Vec<LineFile> {
    units
        .iter()
        .map(|(&product, &u)| LineFile {
            product: product as i64,
            units: u as i64,
        })
        .collect()
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<Instance, IoError> {
        if self.num_products <= 0 {
            return Err(schema("num_products", "must be positive"));
        }
        let n = self.num_products as usize;
        let mut orders = Vec::with_capacity(self.orders.len());
        for (o, order) in self.orders.iter().enumerate() {
            let path = format!("orders[{o}].lines");
            if order.lines.is_empty() {
                return Err(schema(path, "order has no lines"));
            }
            orders.push(unit_map(&order.lines, n, &path, 1)?);
        }
        let racks = self
            .racks
            .iter()
            .enumerate()
            .map(|(r, rack)| unit_map(&rack.supply, n, &format!("racks[{r}].supply"), 0))
            .collect::<Result<Vec<_>, _>>()?;
        let capacities = self
            .pickers
            .iter()
            .enumerate()
            .map(|(p, picker)| {
                if picker.capacity < 0 {
                    Err(schema(format!("pickers[{p}].capacity"), "must not be negative"))
                } else {
                    Ok(picker.capacity as usize)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let face_groups = self
            .face_groups
            .unwrap_or_default()
            .iter()
            .enumerate()
            .map(|(g, group)| {
                group
                    .iter()
                    .enumerate()
                    .map(|(at, &r)| index(r, racks.len(), &format!("face_groups[{g}][{at}]"), "rack"))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let inst = Instance {
            name: self.name,
            num_products: n,
            orders,
            racks,
            capacities,
            face_groups,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn from_instance(inst: &Instance) -> Self {
        Self {
            name: inst.name.clone(),
            num_products: inst.num_products as i64,
            orders: inst.orders.iter().map(|o| OrderFile { lines: lines_of(o) }).collect(),
            racks: inst.racks.iter().map(|r| RackFile { supply: lines_of(r) }).collect(),
            pickers: inst.capacities.iter().map(|&c| PickerFile { capacity: c as i64 }).collect(),
            face_groups: (!inst.face_groups.is_empty())
                .then(|| inst.face_groups.iter().map(|g| g.iter().map(|&r| r as i64).collect()).collect()),
        }
    }
}

pub fn parse_instance(text: &str) -> Result<Instance, IoError> {
    parse::<InstanceFile>(text)?.into_instance()
}

pub fn instance_to_json(inst: &Instance) -> String {
    to_json(&InstanceFile::from_instance(inst))
}

pub fn read_instance(path: &Path) -> Result<Instance, IoError> {
    parse_instance(&read_text(path)?)
}

pub fn write_instance(inst: &Instance, path: &Path) -> Result<(), IoError> {
    write_text(path, &instance_to_json(inst))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DrawFile {
    pub product: usize,
    pub rack: usize,
    pub picker: usize,
    pub units: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AllocationFile {
    pub orders_of_picker: Vec<Vec<usize>>,
    pub racks_of_picker: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws: Option<Vec<DrawFile>>,
}

impl AllocationFile {
    pub fn from_allocation(alloc: &Allocation) -> Self {
        Self {
            orders_of_picker: alloc.orders_of_picker.clone(),
            racks_of_picker: alloc.racks_of_picker.clone(),
            draws: (!alloc.draws.is_empty()).then(|| {
                alloc
                    .draws
                    .iter()
                    .map(|d| DrawFile {
                        product: d.product,
                        rack: d.rack,
                        picker: d.picker,
                        units: d.units,
                    })
                    .collect()
            }),
        }
    }

    pub fn into_allocation(self) -> Allocation {
        let mut alloc = Allocation {
            orders_of_picker: self.orders_of_picker,
            racks_of_picker: self.racks_of_picker,
            used_racks: vec![],
            draws: self
                .draws
                .unwrap_or_default()
                .into_iter()
                .map(|d| Draw {
                    product: d.product,
                    rack: d.rack,
                    picker: d.picker,
                    units: d.units,
                })
                .collect(),
        };
        alloc.normalise();
        alloc
    }
}

pub fn allocation_to_json(alloc: &Allocation) -> String {
    to_json(&AllocationFile::from_allocation(alloc))
}

pub fn parse_allocation(text: &str) -> Result<Allocation, IoError> {
    Ok(parse::<AllocationFile>(text)?.into_allocation())
}

pub fn read_allocation(path: &Path) -> Result<Allocation, IoError> {
    parse_allocation(&read_text(path)?)
}

pub fn write_allocation(alloc: &Allocation, path: &Path) -> Result<(), IoError> {
    write_text(path, &allocation_to_json(alloc))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct PickFile {
    pub product: usize,
    pub order: usize,
    pub position: usize,
    pub units: u32,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct FlagFile {
    pub order: usize,
    pub position: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SequenceRackFile {
    pub rack: usize,
    pub supply: Vec<LineFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SequenceFile {
    pub picker: usize,
    pub bins: usize,
    /// `null` when revisits are unlimited.
    pub revisits: Option<u32>,
    #[serde(default)]
    pub single_bin: bool,
    pub orders: Vec<usize>,
    pub racks: Vec<SequenceRackFile>,
    pub rack_order: Vec<usize>,
    pub picks: Vec<PickFile>,
    pub open: Vec<FlagFile>,
    pub close: Vec<FlagFile>,
}

/// A sequence together with the picker data it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRecord {
    pub picker: usize,
    pub mode: SequencingMode,
    pub instance: SequencingInstance,
    pub solution: SequenceSolution,
}

impl SequenceFile {
    pub fn from_record(rec: &SequenceRecord) -> Self {
        let inst = &rec.instance;
        let sol = &rec.solution;
        let flags = |m: &Vec<Vec<bool>>| -> Vec<FlagFile> {
            let mut out = Vec::new();
            for (o, row) in m.iter().enumerate() {
                for (k, &f) in row.iter().enumerate() {
                    if f {
                        out.push(FlagFile {
                            order: inst.order_ids[o],
                            position: k,
                        });
                    }
                }
            }
            out
        };
        Self {
            picker: rec.picker,
            bins: inst.bins,
            revisits: rec.mode.revisits,
            single_bin: rec.mode.single_bin,
            orders: inst.order_ids.clone(),
            racks: inst
                .rack_ids
                .iter()
                .zip(&inst.racks)
                .map(|(&rack, supply)| SequenceRackFile {
                    rack,
                    supply: lines_of(supply),
                })
                .collect(),
            rack_order: sol.rack_order.iter().map(|&r| inst.rack_ids[r]).collect(),
            picks: sol
                .picks
                .iter()
                .map(|p| PickFile {
                    product: p.product,
                    order: inst.order_ids[p.order],
                    position: p.position,
                    units: p.units,
                })
                .collect(),
            open: flags(&sol.open),
            close: flags(&sol.close),
        }
    }

    /// Rebuilds the record; order contents come from `instance`.
    pub fn into_record(self, instance: &Instance) -> Result<SequenceRecord, IoError> {
        let mut orders = Vec::with_capacity(self.orders.len());
        let mut local_order = BTreeMap::new();
        for (at, &o) in self.orders.iter().enumerate() {
            if o >= instance.num_orders() {
                return Err(schema(format!("orders[{at}]"), format!("order {o} not in instance")));
            }
            if local_order.insert(o, at).is_some() {
                return Err(schema(format!("orders[{at}]"), format!("order {o} listed twice")));
            }
            orders.push(instance.orders[o].clone());
        }
        let mut local_rack = BTreeMap::new();
        let mut racks = Vec::with_capacity(self.racks.len());
        for (at, rack) in self.racks.iter().enumerate() {
            if rack.rack >= instance.num_racks() {
                return Err(schema(format!("racks[{at}].rack"), format!("rack {} not in instance", rack.rack)));
            }
            if local_rack.insert(rack.rack, at).is_some() {
                return Err(schema(format!("racks[{at}].rack"), format!("rack {} listed twice", rack.rack)));
            }
            racks.push(unit_map(&rack.supply, instance.num_products, &format!("racks[{at}].supply"), 0)?);
        }
        let rack_ids = self.racks.iter().map(|r| r.rack).collect();
        let seq_inst = SequencingInstance::with_ids(orders, self.orders.clone(), racks, rack_ids, self.bins)?;
        let rack_order = self
            .rack_order
            .iter()
            .enumerate()
            .map(|(k, r)| local_rack.get(r).copied().ok_or_else(|| schema(format!("rack_order[{k}]"), format!("rack {r} not listed"))))
            .collect::<Result<Vec<_>, _>>()?;
        let order_of = |o: usize, path: String| local_order.get(&o).copied().ok_or_else(|| schema(path, format!("order {o} not listed")));
        let picks = self
            .picks
            .iter()
            .enumerate()
            .map(|(at, p)| {
                Ok(Pick {
                    product: p.product,
                    order: order_of(p.order, format!("picks[{at}].order"))?,
                    position: p.position,
                    units: p.units,
                })
            })
            .collect::<Result<Vec<_>, IoError>>()?;
        let k_count = rack_order.len();
        let mut open = vec![vec![false; k_count]; seq_inst.num_orders()];
        let mut close = open.clone();
        for (name, flags, target) in [("open", &self.open, &mut open), ("close", &self.close, &mut close)] {
            for (at, f) in flags.iter().enumerate() {
                let o = order_of(f.order, format!("{name}[{at}].order"))?;
                if f.position >= k_count {
                    return Err(schema(format!("{name}[{at}].position"), format!("position {} beyond {k_count} slots", f.position)));
                }
                target[o][f.position] = true;
            }
        }
        Ok(SequenceRecord {
            picker: self.picker,
            mode: SequencingMode {
                revisits: self.revisits,
                single_bin: self.single_bin,
            },
            instance: seq_inst,
            solution: SequenceSolution {
                rack_order,
                picks,
                open,
                close,
            },
        })
    }
}

pub fn sequence_to_json(rec: &SequenceRecord) -> String {
    to_json(&SequenceFile::from_record(rec))
}

pub fn parse_sequence(text: &str, instance: &Instance) -> Result<SequenceRecord, IoError> {
    parse::<SequenceFile>(text)?.into_record(instance)
}

pub fn write_sequence(rec: &SequenceRecord, path: &Path) -> Result<(), IoError> {
    write_text(path, &sequence_to_json(rec))
}

/// Kind of solution stored in a JSON file, told apart by its keys.
#[derive(Debug, Clone, PartialEq)]
pub enum SolutionFile {
    Allocation(Allocation),
    Sequence(Box<SequenceRecord>),
}

pub fn read_solution(path: &Path, instance: &Instance) -> Result<SolutionFile, IoError> {
    let text = read_text(path)?;
    let value: serde_json::Value = parse(&text)?;
    if value.get("rack_order").is_some() {
        Ok(SolutionFile::Sequence(Box::new(parse_sequence(&text, instance)?)))
    } else {
        Ok(SolutionFile::Allocation(parse_allocation(&text)?))
    }
}

pub const RESULTS_HEADER: [&str; 13] = ["instance", "P", "Cp", "method", "T_s", "B_s", "UB", "GAP", "LB", "FGAP", "FLB", "NS", "status"];

/// One line of the results table. Gaps are derived when written.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub instance: String,
    pub pickers: usize,
    pub capacities: Vec<usize>,
    pub method: String,
    pub total_time_s: f64,
    pub best_time_s: Option<f64>,
    pub ub: Option<f64>,
    pub lb: Option<f64>,
    pub flb: Option<f64>,
    pub nodes: u64,
    pub status: String,
}

fn bound_text(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.4}")
    }
}

fn gap_text(ub: &str, bound: &str) -> String {
    match (ub.parse::<f64>(), bound.parse::<f64>()) {
        (Ok(u), Ok(b)) if u.abs() > 0.0 => format!("{:.2}", 100.0 * (u - b) / u),
        _ => String::new(),
    }
}

impl ResultRow {
    pub fn fields(&self) -> [String; 13] {
        let opt = |v: Option<f64>| v.map(bound_text).unwrap_or_default();
        let ub = opt(self.ub);
        let lb = opt(self.lb);
        let flb = opt(self.flb);
        let cp = if self.capacities.windows(2).all(|w| w[0] == w[1]) {
            self.capacities.first().map(|c| c.to_string()).unwrap_or_default()
        } else {
            self.capacities.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("/")
        };
        [
            self.instance.clone(),
            self.pickers.to_string(),
            cp,
            self.method.clone(),
            format!("{:.2}", self.total_time_s),
            self.best_time_s.map(|t| format!("{t:.2}")).unwrap_or_default(),
            ub.clone(),
            gap_text(&ub, &lb),
            lb,
            gap_text(&ub, &flb),
            flb,
            self.nodes.to_string(),
            self.status.clone(),
        ]
    }
}

pub fn write_results<W: Write>(rows: &[ResultRow], out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_results_csv(rows: &[ResultRow], path: &Path) -> Result<(), IoError> {
    let file = fs::File::create(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })?;
    write_results(rows, file)
}

/// Appends rows, writing the header first when the file is new or empty.
pub fn append_results_csv(rows: &[ResultRow], path: &Path) -> Result<(), IoError> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = fs::OpenOptions::new().create(true).append(true).open(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        w.write_record(RESULTS_HEADER)?;
    }
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
