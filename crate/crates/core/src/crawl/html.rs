//! Visible-text normalization and link extraction.

use ego_tree::iter::Edge;
use scraper::{ElementRef, Html, Node, Selector};
use url::Url;

const SKIPPED: &[&str] = &["script", "style", "noscript", "template", "head", "svg"];

const BLOCKS: &[&str] = &[
    "address", "article", "aside", "blockquote", "br", "dd", "div", "dl", "dt", "figcaption",
    "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "li", "main",
    "nav", "ol", "p", "pre", "section", "table", "td", "th", "tr", "ul", "body", "title",
];

/// Collapse whitespace within lines, trim them and drop empty lines.
pub fn normalize_lines(text: &str) -> String {
    text.lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

fn looks_like_html(s: &str) -> bool {
    let head = s.trim_start();
    head.starts_with('<') || head.contains("<html") || head.contains("<body")
}

/// Markup stripped, whitespace collapsed, case preserved; block elements
/// end lines so line-based diffs follow the page structure.
pub fn visible_text(body: &str) -> String {
    if !looks_like_html(body) {
        return normalize_lines(body);
    }
    let doc = Html::parse_document(body);
    let mut out = String::new();
    let mut skip_depth = 0usize;
    for edge in doc.tree.root().traverse() {
        match edge {
            Edge::Open(node) => match node.value() {
                Node::Element(e) => {
                    let name = e.name();
                    if SKIPPED.contains(&name) {
                        skip_depth += 1;
                    } else if skip_depth == 0 && BLOCKS.contains(&name) {
                        out.push('\n');
                    }
                }
                Node::Text(t) if skip_depth == 0 => out.push_str(t),
                _ => {}
            },
            Edge::Close(node) => {
                if let Node::Element(e) = node.value() {
                    let name = e.name();
                    if SKIPPED.contains(&name) {
                        skip_depth = skip_depth.saturating_sub(1);
                    } else if skip_depth == 0 && BLOCKS.contains(&name) {
                        out.push('\n');
                    }
                }
            }
        }
    }
    normalize_lines(&out)
}

/// `(absolute URL, anchor text)` for every http(s) link in document order.
pub fn extract_links(body: &str, base: &str) -> Vec<(String, String)> {
    let Ok(base) = Url::parse(base) else {
        return Vec::new();
    };
    let doc = Html::parse_document(body);
    let sel = Selector::parse("a[href]").expect("static selector");
    doc.select(&sel)
        .filter_map(|a: ElementRef<'_>| {
            let href = a.value().attr("href")?.trim();
            let abs = base.join(href).ok()?;
            if !matches!(abs.scheme(), "http" | "https") {
                return None;
            }
            let anchor = a.text().collect::<Vec<_>>().join(" ");
            Some((abs.to_string(), normalize_lines(&anchor).replace('\n', " ")))
        })
        .collect()
}
