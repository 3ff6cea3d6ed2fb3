//! URL canonicalization and the run-scoped seen-set.

use std::collections::HashSet;

use parking_lot::Mutex;
use url::Url;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot canonicalize `{url}`: {reason}")]
pub struct UrlError {
    pub url: String,
    pub reason: String,
}

/// Uppercase the hex digits of every `%XX` escape.
fn upper_percent(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%'
            && i + 2 < bytes.len()
            && bytes[i + 1].is_ascii_hexdigit()
            && bytes[i + 2].is_ascii_hexdigit()
        {
            out.push('%');
            out.push(bytes[i + 1].to_ascii_uppercase() as char);
            out.push(bytes[i + 2].to_ascii_uppercase() as char);
            i += 3;
        } else {
            let ch = s[i..].chars().next().expect("in bounds");
            out.push(ch);
            i += ch.len_utf8();
        }
    }
    out
}

/// Normalize an absolute URL so that equivalent spellings compare equal.
///
/// Scheme and host are lowercased, default ports dropped, dot-segments
/// resolved, the fragment removed, query parameters sorted by key (stable
/// for repeated keys) and percent-escapes uppercased. Idempotent.
pub fn canonicalize_url(raw: &str) -> Result<String, UrlError> {
    let err = |reason: String| UrlError {
        url: raw.to_string(),
        reason,
    };
    let mut url = Url::parse(raw.trim()).map_err(|e| err(e.to_string()))?;
    if url.cannot_be_a_base() || url.host_str().is_none() {
        return Err(err("not a hierarchical URL with a host".into()));
    }
    url.set_fragment(None);
    let query = url.query().map(|q| {
        let mut pairs: Vec<&str> = q.split('&').filter(|p| !p.is_empty()).collect();
        pairs.sort_by_key(|p| p.split('=').next().unwrap_or(""));
        upper_percent(&pairs.join("&"))
    });
    match query {
        Some(q) if !q.is_empty() => url.set_query(Some(&q)),
        _ => url.set_query(None),
    }
    let path = upper_percent(url.path());
    url.set_path(&path);
    Ok(url.to_string())
}

/// Concurrent set of canonical URLs already fetched in this run.
///
/// Membership test and insert happen under one lock, so two workers can
/// never both claim the same URL.
#[derive(Debug, Default)]
pub struct SeenSet {
    inner: Mutex<HashSet<String>>,
}

impl SeenSet {
    pub fn new() -> Self {
        SeenSet::default()
    }

    /// Claim `url`; false when it was already present.
    pub fn insert(&self, url: &str) -> bool {
        self.inner.lock().insert(url.to_string())
    }

    pub fn contains(&self, url: &str) -> bool {
        self.inner.lock().contains(url)
    }

    /// Release a claim, so a failed fetch can be retried later.
    pub fn remove(&self, url: &str) -> bool {
        self.inner.lock().remove(url)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.lock().is_empty()
    }

    /// Sorted copy of the members.
    pub fn snapshot(&self) -> Vec<String> {
        let mut v: Vec<String> = self.inner.lock().iter().cloned().collect();
        v.sort();
        v
    }
}

impl FromIterator<String> for SeenSet {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        SeenSet {
            inner: Mutex::new(iter.into_iter().collect()),
        }
    }
}

/// Inputs not yet in `seen`, in input order; returned items are added.
pub fn dedup(urls: &[String], seen: &SeenSet) -> Vec<String> {
    urls.iter().filter(|u| seen.insert(u)).cloned().collect()
}
