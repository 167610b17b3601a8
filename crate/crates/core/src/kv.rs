//! Minimal `key=value` line documents used for parameter and key files.

use std::collections::BTreeMap;

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::numt;

#[derive(Debug, Default)]
pub(crate) struct KvWriter {
    out: String,
}

impl KvWriter {
    pub fn put(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.out.push_str(key);
        self.out.push('=');
        self.out.push_str(&value.to_string());
        self.out.push('\n');
        self
    }

    pub fn put_int(&mut self, key: &str, value: &BigUint) -> &mut Self {
        self.put(key, numt::to_hex(value))
    }

    pub fn finish(&mut self) -> String {
        std::mem::take(&mut self.out)
    }
}

/// Parsed document. Every key must be consumed; leftovers are reported by
/// [`KvDoc::finish`].
#[derive(Debug)]
pub(crate) struct KvDoc {
    fields: BTreeMap<String, String>,
}

impl KvDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let mut fields = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::format(format!("line {}: expected key=value", lineno + 1)))?;
            if key.is_empty() {
                return Err(Error::format(format!("line {}: empty key", lineno + 1)));
            }
            if fields.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::format(format!("duplicate field {key:?}")));
            }
        }
        Ok(KvDoc { fields })
    }

    pub fn take(&mut self, key: &str) -> Result<String> {
        self.fields
            .remove(key)
            .ok_or_else(|| Error::format(format!("missing field {key:?}")))
    }

    pub fn take_int(&mut self, key: &str) -> Result<BigUint> {
        numt::from_hex(&self.take(key)?)
    }

    pub fn take_parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let raw = self.take(key)?;
        raw.parse()
            .map_err(|_| Error::format(format!("bad value for {key:?}: {raw:?}")))
    }

    pub fn finish(self) -> Result<()> {
        match self.fields.keys().next() {
            Some(extra) => Err(Error::format(format!("unexpected field {extra:?}"))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_rejects_duplicates_and_leftovers() {
        assert!(KvDoc::parse("a=1\na=2\n").is_err());
        assert!(KvDoc::parse("nokey\n").is_err());
        let mut doc = KvDoc::parse("# c\na=1\nb=ff\n").unwrap();
        assert_eq!(doc.take("a").unwrap(), "1");
        assert!(doc.take("zz").is_err());
        let doc2 = KvDoc::parse("a=1\n").unwrap();
        assert!(doc2.finish().is_err());
        assert_eq!(doc.take_int("b").unwrap(), BigUint::from(255u32));
        doc.finish().unwrap();
    }
}
