//! Ordered key-value map with range cursors.
//!
//! Stand-in for the storage product's ordered persistent maps: byte-string
//! keys sort lexicographically, and range scans yield exactly the stored keys
//! in the interval, in order. Persistence is handled above this layer by the
//! record log and snapshots; this structure is the in-memory index.

use std::collections::BTreeMap;
use std::ops::Bound;

#[derive(Default)]
pub struct OrderedKv {
    map: BTreeMap<Vec<u8>, Vec<u8>>,
}

impl OrderedKv {
    pub fn new() -> OrderedKv {
        OrderedKv::default()
    }

    /// Returns true if the key was newly inserted.
    pub fn insert(&mut self, key: &[u8], value: &[u8]) -> bool {
        self.map.insert(key.to_vec(), value.to_vec()).is_none()
    }

    /// Returns true if the key was present.
    pub fn remove(&mut self, key: &[u8]) -> bool {
        self.map.remove(key).is_some()
    }

    pub fn get(&self, key: &[u8]) -> Option<&[u8]> {
        self.map.get(key).map(Vec::as_slice)
    }

    pub fn contains(&self, key: &[u8]) -> bool {
        self.map.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Cursor over keys in `[lo, hi)`, ascending.
    pub fn range(&self, lo: &[u8], hi: &[u8]) -> impl Iterator<Item = (&[u8], &[u8])> {
        self.map
            .range::<[u8], _>((Bound::Included(lo), Bound::Excluded(hi)))
            .map(|(k, v)| (k.as_slice(), v.as_slice()))
    }

    /// Cursor over all keys starting with `prefix`, ascending.
    pub fn scan_prefix<'a>(&'a self, prefix: &'a [u8]) -> impl Iterator<Item = (&'a [u8], &'a [u8])> {
        self.map
            .range::<[u8], _>((Bound::Included(prefix), Bound::Unbounded))
            .take_while(move |(k, _)| k.starts_with(prefix))
            .map(|(k, v)| (k.as_slice(), v.as_slice()))
    }

    /// Like `scan_prefix` but the iterator owns the prefix bytes.
    pub fn scan_prefix_owned(&self, prefix: Vec<u8>) -> impl Iterator<Item = (&[u8], &[u8])> {
        let range = self
            .map
            .range::<[u8], _>((Bound::Included(prefix.as_slice()), Bound::Unbounded));
        range
            .take_while(move |(k, _)| k.starts_with(&prefix))
            .map(|(k, v)| (k.as_slice(), v.as_slice()))
    }

    /// First key `>= key`, if any. The seek primitive behind galloping
    /// bucket intersection.
    pub fn seek_ge(&self, key: &[u8]) -> Option<&[u8]> {
        self.map
            .range::<[u8], _>((Bound::Included(key), Bound::Unbounded))
            .next()
            .map(|(k, _)| k.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u8], &[u8])> {
        self.map.iter().map(|(k, v)| (k.as_slice(), v.as_slice()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_scan_is_exact_and_ordered() {
        let mut kv = OrderedKv::new();
        for k in [b"ab", b"ad", b"ae", b"ba"] {
            kv.insert(k, b"");
        }
        let got: Vec<&[u8]> = kv.range(b"ab", b"ae").map(|(k, _)| k).collect();
        assert_eq!(got, vec![b"ab".as_slice(), b"ad".as_slice()]);
    }

    #[test]
    fn seek_ge_finds_successor() {
        let mut kv = OrderedKv::new();
        kv.insert(b"b", b"");
        kv.insert(b"d", b"");
        assert_eq!(kv.seek_ge(b"a"), Some(b"b".as_slice()));
        assert_eq!(kv.seek_ge(b"b"), Some(b"b".as_slice()));
        assert_eq!(kv.seek_ge(b"c"), Some(b"d".as_slice()));
        assert_eq!(kv.seek_ge(b"e"), None);
    }

    #[test]
    fn prefix_scan_stops_at_prefix_end() {
        let mut kv = OrderedKv::new();
        kv.insert(b"aa1", b"");
        kv.insert(b"aa2", b"");
        kv.insert(b"ab1", b"");
        assert_eq!(kv.scan_prefix(b"aa").count(), 2);
    }
}
