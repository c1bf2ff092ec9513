//! Introspective reports: schema-conforming interpretations of episode
//! traces, and their featurisation into symbolic datasets for mining.

use std::collections::BTreeMap;
use std::io;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knowledge::{validate_instance, Domain, InformationState, Schema, Scope, Value};
use crate::world::{EpisodeTrace, MoveOutcome, OUTCOME};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelRule {
    /// Every decision, labeled with the move outcome.
    OutcomeAsClass,
    /// Successful decisions only, labeled with the chosen strategy.
    StrategyAsClass,
}

/// Decides which attributes go into a report and how rows are labeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataProvider {
    pub selected_attributes: Vec<String>,
    pub label_rule: LabelRule,
}

impl MetadataProvider {
    pub fn new<I, S>(selected: I, label_rule: LabelRule) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            selected_attributes: selected.into_iter().map(Into::into).collect(),
            label_rule,
        }
    }

    pub fn label_attribute<'a>(&self, schema: &'a Schema) -> &'a str {
        match self.label_rule {
            LabelRule::OutcomeAsClass => OUTCOME,
            LabelRule::StrategyAsClass => schema.class_attribute(),
        }
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        let mut world = false;
        for name in &self.selected_attributes {
            let def = schema
                .attribute(name)
                .ok_or_else(|| Error::InvalidProvider(format!("unknown attribute `{name}`")))?;
            world |= def.scope == Scope::World;
        }
        if !world {
            return Err(Error::InvalidProvider("no world attribute selected".into()));
        }
        let label = self.label_attribute(schema);
        match schema.attribute(label) {
            Some(d) if !d.domain.is_numeric() => Ok(()),
            _ => Err(Error::InvalidProvider(format!("label attribute `{label}` is not symbolic in the schema"))),
        }
    }

    /// Report columns: selected attributes plus the label, in schema order.
    fn columns(&self, schema: &Schema) -> Vec<String> {
        let label = self.label_attribute(schema);
        schema
            .attributes()
            .iter()
            .filter(|a| a.name == label || self.selected_attributes.contains(&a.name))
            .map(|a| a.name.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntrospectiveReport {
    pub schema: Arc<Schema>,
    pub columns: Vec<String>,
    pub label_attribute: String,
    pub rows: Vec<InformationState>,
}

/// One row per decision record, projected onto the provider's selection.
pub fn collect_report(
    trace: &EpisodeTrace,
    provider: &MetadataProvider,
    schema: &Arc<Schema>,
) -> Result<IntrospectiveReport> {
    provider.validate(schema)?;
    let columns = provider.columns(schema);
    let keep_failures = provider.label_rule == LabelRule::OutcomeAsClass;
    let mut rows = Vec::new();
    for record in &trace.records {
        if !keep_failures && record.outcome != MoveOutcome::Success {
            continue;
        }
        let full = record.full_state();
        let mut row = InformationState::new(record.epoch);
        for c in &columns {
            let v = full.get(c).ok_or_else(|| Error::AttributeNotInTrace(c.clone()))?;
            row.set(c.clone(), v.clone());
        }
        validate_instance(schema, &row)?;
        rows.push(row);
    }
    Ok(IntrospectiveReport {
        schema: Arc::clone(schema),
        columns,
        label_attribute: provider.label_attribute(schema).to_owned(),
        rows,
    })
}

/// Equal-width discretisation over an observed range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub min: f64,
    pub max: f64,
    pub bins: usize,
}

impl Binning {
    pub fn bin(&self, x: f64) -> usize {
        if self.bins <= 1 || self.max <= self.min {
            return 0;
        }
        let t = (x - self.min) / (self.max - self.min) * self.bins as f64;
        if t <= 0.0 {
            0
        } else {
            (t.floor() as usize).min(self.bins - 1)
        }
    }

    pub fn label(&self, x: f64) -> String {
        bin_label(self.bin(x))
    }

    /// Interior boundaries between consecutive bins.
    pub fn boundaries(&self) -> Vec<f64> {
        let w = (self.max - self.min) / self.bins as f64;
        (1..self.bins).map(|i| self.min + w * i as f64).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.bins.max(1)).map(bin_label).collect()
    }
}

fn bin_label(i: usize) -> String {
    format!("bin_{i}")
}

/// Symbolic label of `value` for `attribute`, discretising numeric values
/// with the recorded binning when there is one.
pub fn symbolic_label(binnings: &BTreeMap<String, Binning>, attribute: &str, value: &Value) -> String {
    match (value, binnings.get(attribute)) {
        (Value::Num(x), Some(b)) => b.label(*x),
        _ => value.label().into_owned(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetAttribute {
    pub name: String,
    pub scope: Scope,
    pub values: Vec<String>,
}

/// Value indices into the dataset's attribute domains.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instance {
    pub values: Vec<u32>,
    pub class: u32,
}

/// Fully symbolic, fully labeled table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub attributes: Vec<DatasetAttribute>,
    pub class: DatasetAttribute,
    pub instances: Vec<Instance>,
    pub binnings: BTreeMap<String, Binning>,
}

/// Sidecar describing a dataset CSV: domains, scopes and bin ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub attributes: Vec<DatasetAttribute>,
    pub class: DatasetAttribute,
    pub binnings: BTreeMap<String, Binning>,
}

impl Dataset {
    /// Builds a categorical dataset from string rows; handy for tests and
    /// small hand-made tables. All attributes get world scope.
    pub fn from_rows(attributes: &[(&str, &[&str])], class: (&str, &[&str]), rows: &[(Vec<&str>, &str)]) -> Result<Self> {
        let owned = |(n, vs): (&str, &[&str])| DatasetAttribute {
            name: n.to_owned(),
            scope: Scope::World,
            values: vs.iter().map(|v| v.to_string()).collect(),
        };
        let attrs: Vec<_> = attributes.iter().map(|a| owned(*a)).collect();
        let class = DatasetAttribute {
            scope: Scope::Modeller,
            ..owned(class)
        };
        let mut ds = Dataset {
            attributes: attrs,
            class,
            instances: Vec::with_capacity(rows.len()),
            binnings: BTreeMap::new(),
        };
        for (vals, label) in rows {
            if vals.len() != ds.attributes.len() {
                return Err(Error::Parse(format!("row has {} values, expected {}", vals.len(), ds.attributes.len())));
            }
            let values = vals
                .iter()
                .zip(&ds.attributes)
                .map(|(v, a)| index_of(a, v))
                .collect::<Result<_>>()?;
            let class = index_of(&ds.class, label)?;
            ds.instances.push(Instance { values, class });
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn class_label(&self, inst: &Instance) -> &str {
        &self.class.values[inst.class as usize]
    }

    pub fn value_label(&self, inst: &Instance, column: usize) -> &str {
        &self.attributes[column].values[inst.values[column] as usize]
    }

    /// Number of distinct classes that actually occur.
    pub fn classes_present(&self) -> usize {
        let mut seen = vec![false; self.class.values.len()];
        for i in &self.instances {
            seen[i.class as usize] = true;
        }
        seen.into_iter().filter(|&b| b).count()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            attributes: self.attributes.clone(),
            class: self.class.clone(),
            instances: indices.iter().map(|&i| self.instances[i].clone()).collect(),
            binnings: self.binnings.clone(),
        }
    }

    /// Row `i` as a symbolic information state (class included).
    pub fn state(&self, i: usize) -> InformationState {
        let inst = &self.instances[i];
        let mut s = InformationState::new(i as u64);
        for (c, a) in self.attributes.iter().enumerate() {
            s.set(a.name.clone(), Value::cat(self.value_label(inst, c)));
        }
        s.set(self.class.name.clone(), Value::cat(self.class_label(inst)));
        s
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            attributes: self.attributes.clone(),
            class: self.class.clone(),
            binnings: self.binnings.clone(),
        }
    }

    /// Header = attribute names then the class attribute.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.attributes.iter().map(|a| a.name.as_str()).collect();
        header.push(&self.class.name);
        w.write_record(&header)?;
        for inst in &self.instances {
            let mut row: Vec<&str> = (0..self.attributes.len()).map(|c| self.value_label(inst, c)).collect();
            row.push(self.class_label(inst));
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads a dataset CSV. Without a sidecar, the last column is the class
    /// and each domain is the sorted set of observed values.
    pub fn read_csv<R: io::Read>(input: R, meta: Option<&DatasetMeta>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        let rows: Vec<csv::StringRecord> = r.records().collect::<std::result::Result<_, _>>()?;
        if header.is_empty() {
            return Err(Error::Parse("dataset has no columns".into()));
        }
        let meta = match meta {
            Some(m) => m.clone(),
            None => {
                let domain = |c: usize| {
                    let mut v: Vec<String> = rows.iter().map(|r| r[c].to_owned()).collect();
                    v.sort();
                    v.dedup();
                    v
                };
                let n = header.len() - 1;
                DatasetMeta {
                    attributes: (0..n)
                        .map(|c| DatasetAttribute {
                            name: header[c].clone(),
                            scope: Scope::World,
                            values: domain(c),
                        })
                        .collect(),
                    class: DatasetAttribute {
                        name: header[n].clone(),
                        scope: Scope::Modeller,
                        values: domain(n),
                    },
                    binnings: BTreeMap::new(),
                }
            }
        };
        let expected: Vec<&str> = meta
            .attributes
            .iter()
            .map(|a| a.name.as_str())
            .chain(std::iter::once(meta.class.name.as_str()))
            .collect();
        if header.iter().map(String::as_str).ne(expected.iter().copied()) {
            return Err(Error::Parse(format!("header {header:?} does not match {expected:?}")));
        }
        let n = meta.attributes.len();
        let mut instances = Vec::with_capacity(rows.len());
        for row in &rows {
            let values = (0..n)
                .map(|c| index_of(&meta.attributes[c], &row[c]))
                .collect::<Result<_>>()?;
            instances.push(Instance {
                values,
                class: index_of(&meta.class, &row[n])?,
            });
        }
        Ok(Dataset {
            attributes: meta.attributes,
            class: meta.class,
            instances,
            binnings: meta.binnings,
        })
    }
}

fn index_of(attr: &DatasetAttribute, value: &str) -> Result<u32> {
    attr.values
        .iter()
        .position(|v| v == value)
        .map(|i| i as u32)
        .ok_or_else(|| Error::OutOfDomainValue {
            attribute: attr.name.clone(),
            value: value.to_owned(),
        })
}

/// Concatenates report rows in order and discretises numeric attributes
/// into `bins` equal-width intervals over their observed range.
pub fn featurise(reports: &[IntrospectiveReport], bins: usize) -> Result<Dataset> {
    if bins == 0 {
        return Err(Error::InvalidConfig("bins must be positive".into()));
    }
    let first = reports.first().ok_or(Error::EmptyDataset)?;
    for r in &reports[1..] {
        if r.schema != first.schema || r.columns != first.columns || r.label_attribute != first.label_attribute {
            return Err(Error::ReportMismatch);
        }
    }
    let schema = &first.schema;
    let rows: Vec<&InformationState> = reports.iter().flat_map(|r| r.rows.iter()).collect();
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let label = first.label_attribute.as_str();

    let mut binnings = BTreeMap::new();
    let mut attributes = Vec::new();
    let mut class = None;
    for name in &first.columns {
        let def = schema.attribute(name).ok_or_else(|| Error::UnknownAttribute(name.clone()))?;
        let values = match &def.domain {
            Domain::Numeric { .. } => {
                let xs = rows.iter().filter_map(|r| r.get(name).and_then(Value::as_f64));
                let (min, max) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
                let b = Binning { min, max, bins };
                binnings.insert(name.clone(), b);
                b.labels()
            }
            d => d.labels().expect("symbolic domain"),
        };
        let attr = DatasetAttribute {
            name: name.clone(),
            scope: def.scope,
            values,
        };
        if name == label {
            class = Some(attr);
        } else {
            attributes.push(attr);
        }
    }
    let class = class.ok_or_else(|| Error::UnknownAttribute(label.to_owned()))?;
    if binnings.contains_key(label) {
        return Err(Error::InvalidClassAttribute(label.to_owned()));
    }

    let mut instances = Vec::with_capacity(rows.len());
    for row in rows {
        let coded = |a: &DatasetAttribute| -> Result<u32> {
            let v = row.get(&a.name).ok_or_else(|| Error::MissingRequiredAttribute(a.name.clone()))?;
            index_of(a, &symbolic_label(&binnings, &a.name, v))
        };
        instances.push(Instance {
            values: attributes.iter().map(coded).collect::<Result<_>>()?,
            class: coded(&class)?,
        });
    }
    Ok(Dataset {
        attributes,
        class,
        instances,
        binnings,
    })
}
