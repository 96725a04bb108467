use std::collections::BTreeSet;

use scraper::node::Node;
use scraper::Html;
use serde::{Deserialize, Serialize};
use url::Url;

use crate::model::{normalize_url, EepsiteId, UrlRejection};

/// Home-page content counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageStats {
    pub letters: u64,
    pub words: u64,
    pub images: u64,
    pub scripts: u64,
}

/// Links found on one page, split by where they point.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExtractedLinks {
    /// Same-host paths, query kept, fragment dropped.
    pub internal: BTreeSet<String>,
    pub external: BTreeSet<EepsiteId>,
    /// Clearnet URLs; reported but never graph edges.
    pub surface: BTreeSet<String>,
}

/// A parsed page, so callers that need both stats and links parse once.
pub struct ParsedPage {
    doc: Html,
}

impl ParsedPage {
    pub fn parse(html: &str) -> Self {
        ParsedPage {
            doc: Html::parse_document(html),
        }
    }

    /// Text left after removing markup and the bodies of `script`/`style`.
    /// Block-level element boundaries read as whitespace, inline ones do not.
    pub fn visible_text(&self) -> String {
        let mut out = String::new();
        // explicit stack: malformed documents can nest arbitrarily deep
        let mut stack = vec![(self.doc.tree.root(), false)];
        while let Some((node, leaving)) = stack.pop() {
            match node.value() {
                Node::Text(text) => out.push_str(text),
                Node::Element(el) => {
                    let name = el.name();
                    if matches!(name, "script" | "style") {
                        continue;
                    }
                    let block = is_block(name);
                    if block {
                        out.push(' ');
                    }
                    if !leaving {
                        if block {
                            stack.push((node, true));
                        }
                        stack.extend(node.children().rev().map(|c| (c, false)));
                    }
                }
                Node::Document | Node::Fragment => {
                    stack.extend(node.children().rev().map(|c| (c, false)));
                }
                _ => {}
            }
        }
        out
    }

    pub fn stats(&self) -> PageStats {
        let text = self.visible_text();
        let mut stats = PageStats {
            letters: text.chars().filter(|c| c.is_alphabetic()).count() as u64,
            words: text.split_whitespace().count() as u64,
            ..PageStats::default()
        };
        for node in self.doc.tree.root().descendants() {
            if let Some(el) = node.value().as_element() {
                match el.name() {
                    "img" => stats.images += 1,
                    "script" => stats.scripts += 1,
                    _ => {}
                }
            }
        }
        stats
    }

    pub fn links(&self, site: &EepsiteId, page_path: &str) -> ExtractedLinks {
        let mut links = ExtractedLinks::default();
        let base = match Url::parse(&format!("http://{}/", site.as_str())).and_then(|b| b.join(page_path)) {
            Ok(base) => base,
            Err(_) => return links,
        };
        for node in self.doc.tree.root().descendants() {
            let Some(el) = node.value().as_element() else {
                continue;
            };
            if !matches!(el.name(), "a" | "area") {
                continue;
            }
            let Some(href) = el.attr("href") else {
                continue;
            };
            let Ok(mut target) = base.join(href.trim()) else {
                continue;
            };
            if !matches!(target.scheme(), "http" | "https") {
                continue;
            }
            target.set_fragment(None);
            match normalize_url(target.as_str()) {
                Ok(host) if &host == site => {
                    let mut path = target.path().to_string();
                    if let Some(q) = target.query() {
                        path.push('?');
                        path.push_str(q);
                    }
                    links.internal.insert(path);
                }
                Ok(host) => {
                    links.external.insert(host);
                }
                Err(UrlRejection::NotI2p(_)) => {
                    links.surface.insert(target.to_string());
                }
                Err(UrlRejection::Malformed(_)) => {}
            }
        }
        links
    }
}

fn is_block(name: &str) -> bool {
    matches!(
        name,
        "address" | "article" | "aside" | "blockquote" | "body" | "br" | "caption" | "dd" | "div"
            | "dl" | "dt" | "fieldset" | "figcaption" | "figure" | "footer" | "form" | "h1" | "h2"
            | "h3" | "h4" | "h5" | "h6" | "head" | "header" | "hr" | "html" | "li" | "main" | "nav"
            | "ol" | "option" | "p" | "pre" | "section" | "table" | "tbody" | "td" | "tfoot" | "th"
            | "thead" | "title" | "tr" | "ul"
    )
}

/// Letters, words, images and scripts of one document.
pub fn page_stats(html: &str) -> PageStats {
    ParsedPage::parse(html).stats()
}

/// Partitions the anchors of a page on `site` at `page_path` into internal
/// paths, external eepsites and clearnet URLs.
pub fn extract_links(html: &str, site: &EepsiteId, page_path: &str) -> ExtractedLinks {
    ParsedPage::parse(html).links(site, page_path)
}
