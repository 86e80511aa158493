//! JSON network files.
//!
//! A file holds the format version, the structure tag with its dimensions,
//! the init record, the node order, and every node's shape, index descriptors
//! and row-major data. Floats are written as shortest round-trip decimals and
//! parsed with correct rounding, so a save/load cycle is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{IndexRef, Node, NodeId, Structure, TensorNetworkLayer};
use crate::tensor::{DenseTensor, InitParams};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub format_version: u32,
    pub structure: Structure,
    pub init: Option<InitParams>,
    pub order: Vec<NodeId>,
    pub nodes: Vec<NodeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub shape: Vec<usize>,
    pub indices: Vec<IndexRef>,
    pub data: Vec<f64>,
}

impl NetworkFile {
    pub fn from_network(tn: &TensorNetworkLayer) -> Result<Self> {
        let nodes = tn
            .nodes()
            .iter()
            .enumerate()
            .map(|(id, node)| {
                if node.tensor.data().iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "node {id} holds non-finite entries, which the format cannot represent"
                    )));
                }
                Ok(NodeRecord {
                    shape: node.tensor.shape().to_vec(),
                    indices: node.indices.clone(),
                    data: node.tensor.data().to_vec(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NetworkFile {
            format_version: FORMAT_VERSION,
            structure: tn.structure(),
            init: tn.init(),
            order: tn.order().to_vec(),
            nodes,
        })
    }

    pub fn into_network(self) -> Result<TensorNetworkLayer> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: self.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let nodes = self
            .nodes
            .into_iter()
            .map(|rec| {
                Ok(Node::new(
                    DenseTensor::new(rec.shape, rec.data)?,
                    rec.indices,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        TensorNetworkLayer::from_parts(nodes, self.structure, self.order, self.init)
    }
}

pub fn to_json(tn: &TensorNetworkLayer) -> Result<String> {
    let file = NetworkFile::from_network(tn)?;
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::InvalidArgument(format!("serialize network: {e}")))?;
    text.push('\n');
    Ok(text)
}

pub fn from_json(text: &str) -> Result<TensorNetworkLayer> {
    if text.trim().is_empty() {
        return Err(Error::Malformed("empty document".into()));
    }
    // Read the version first so a future format is reported as such rather
    // than as a schema error.
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Malformed("missing format_version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(Error::VersionMismatch {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    let file: NetworkFile =
        serde_json::from_value(value).map_err(|e| Error::Malformed(e.to_string()))?;
    file.into_network()
}

pub fn save_network(tn: &TensorNetworkLayer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = to_json(tn)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_network(path: impl AsRef<Path>) -> Result<TensorNetworkLayer> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::IndexKind;

    #[test]
    fn round_trip_is_bit_exact() {
        let init = InitParams::gaussian(1.0, 0.5, 3);
        let tn = TensorNetworkLayer::build_tt(3, 2, 2, &init).unwrap();
        let back = from_json(&to_json(&tn).unwrap()).unwrap();
        assert_eq!(back, tn);
        for (a, b) in tn.nodes().iter().zip(back.nodes()) {
            let bits = |t: &DenseTensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.tensor), bits(&b.tensor));
        }
    }

    #[test]
    fn single_node_tt_file() {
        let tn = TensorNetworkLayer::build_tt(1, 2, 1, &InitParams::default()).unwrap();
        let file = NetworkFile::from_network(&tn).unwrap();
        assert_eq!(file.nodes.len(), 1);
        assert_eq!(file.nodes[0].indices.len(), 1);
        assert_eq!(file.nodes[0].indices[0].kind, IndexKind::PhysicalOut);
        assert!(file.nodes[0].indices[0].is_physical());
    }

    #[test]
    fn corrupted_peer_is_rejected() {
        let tn = TensorNetworkLayer::build_tt(3, 2, 2, &InitParams::default()).unwrap();
        let text = to_json(&tn).unwrap();
        let needle = "\"peer_node\": 2";
        assert!(text.contains(needle));
        let corrupted = text.replacen(needle, "\"peer_node\": 0", 1);
        assert!(matches!(
            from_json(&corrupted),
            Err(Error::BondConsistency(_))
        ));
    }

    #[test]
    fn empty_and_future_documents() {
        assert!(matches!(from_json(""), Err(Error::Malformed(_))));
        assert!(matches!(from_json("{"), Err(Error::Malformed(_))));
        let tn = TensorNetworkLayer::build_tt(2, 2, 2, &InitParams::default()).unwrap();
        let text = to_json(&tn)
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 999");
        assert!(matches!(
            from_json(&text),
            Err(Error::VersionMismatch {
                found: 999,
                expected: 1
            })
        ));
    }

    #[test]
    fn structure_tag_is_rechecked() {
        let tn = TensorNetworkLayer::build_tt(3, 2, 2, &InitParams::default()).unwrap();
        let text = to_json(&tn)
            .unwrap()
            .replacen("\"nodes\": 3", "\"nodes\": 4", 1);
        assert!(matches!(from_json(&text), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn non_finite_entries_cannot_be_saved() {
        let mut tn = TensorNetworkLayer::build_tt(2, 2, 2, &InitParams::constant(1e300)).unwrap();
        tn.scale_all_nodes(1e10);
        assert!(to_json(&tn).is_err());
    }
}
