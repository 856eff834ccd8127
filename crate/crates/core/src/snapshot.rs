//! Named-tensor snapshots of trained models.
//!
//! A snapshot is the in-memory form of a checkpoint: a model kind, string
//! metadata and an ordered list of tensors. Serialization lives in the `ilq`
//! crate; everything here is allocation-only.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub kind: String,
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<NamedTensor<T>>,
}

impl<T: Real> Snapshot<T> {
    pub fn new(kind: impl Into<String>) -> Self {
        Self { kind: kind.into(), meta: BTreeMap::new(), tensors: Vec::new() }
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.meta.insert(key.into(), value.to_string());
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Snapshot(format!("missing metadata key `{key}`")))
    }

    pub fn meta_parse<V: core::str::FromStr>(&self, key: &str) -> Result<V> {
        self.meta(key)?.parse().map_err(|_| Error::Snapshot(format!("unparsable metadata `{key}`")))
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<T>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.tensors.push(NamedTensor { name: name.into(), shape, data });
    }

    pub fn tensor(&self, name: &str) -> Result<&NamedTensor<T>> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Snapshot(format!("missing tensor `{name}`")))
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::Snapshot(format!("expected a `{kind}` snapshot, found `{}`", self.kind)))
        }
    }
}

pub(crate) fn join_usize(values: &[usize]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub(crate) fn split_usize(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|p| p.trim().parse().map_err(|_| Error::Snapshot(format!("bad integer list `{text}`"))))
        .collect()
}
