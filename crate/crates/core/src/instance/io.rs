use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GraphDescription, Instance};
use crate::error::{Error, Result};

/// On-disk JSON layout of an [`Instance`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub num_facilities: usize,
    pub num_clients: usize,
    pub k: usize,
    pub u: usize,
    pub colocated: bool,
    /// Row-major `(nF + nC)^2` matrix, facilities first.
    pub dist: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        InstanceFile {
            num_facilities: inst.num_facilities(),
            num_clients: inst.num_clients(),
            k: inst.k(),
            u: inst.u(),
            colocated: inst.colocated(),
            dist: inst.dist_matrix().to_vec(),
            graph: inst
                .graph()
                .map(|g| GraphFile { n: g.vertex_count, edges: g.edges.iter().map(|&(a, b)| [a, b]).collect() }),
        }
    }
}

impl TryFrom<InstanceFile> for Instance {
    type Error = Error;

    fn try_from(file: InstanceFile) -> Result<Self> {
        let inst = Instance::new(file.num_facilities, file.num_clients, file.k, file.u, file.colocated, file.dist)?;
        Ok(match file.graph {
            Some(g) => {
                let edges = g.edges.iter().map(|e| (e[0], e[1])).collect();
                inst.with_graph(GraphDescription::new(g.n, edges)?)
            }
            None => inst,
        })
    }
}

impl Instance {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Instance::try_from(file)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&InstanceFile::from(self)).expect("instance serialises")
    }
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    Instance::from_json_str(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, inst.to_json_string() + "\n")?;
    Ok(())
}
