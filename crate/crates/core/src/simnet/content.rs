//! Deterministic page bodies for simulated sites.
//!
//! Pages form a tree: page 0 is `/`, page `i > 0` is `/p/<i>`, and the
//! children of page `i` are `FANOUT*i + 1 ..= FANOUT*i + FANOUT`. The
//! site's outgoing edges are spread round-robin over its pages.

use std::collections::HashSet;
use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use super::churn::stream_rng;
use super::SimSite;
use crate::spider::{stopwords, PageStats, SUPPORTED_LANGUAGES};

pub(crate) const FANOUT: u32 = 8;

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ru", "te", "zo", "ba", "ne", "fu", "gi", "po", "sa", "vu", "xe", "ly", "dro",
];

#[cfg(test)]
fn page_path(page: u32) -> String {
    if page == 0 {
        "/".to_string()
    } else {
        format!("/p/{page}")
    }
}

pub(crate) fn parse_page_path(path: &str, pages: u32) -> Option<u32> {
    let path = path.split('#').next().unwrap_or("");
    if path == "/" || path.is_empty() {
        return Some(0);
    }
    let n: u32 = path.strip_prefix("/p/")?.parse().ok()?;
    (n >= 1 && n < pages && path == format!("/p/{n}")).then_some(n)
}

fn all_stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        SUPPORTED_LANGUAGES
            .iter()
            .flat_map(|c| stopwords(c).unwrap_or(&[]).iter().copied())
            .collect()
    })
}

/// Made-up content word that is no language's stopword.
fn filler(rng: &mut ChaCha8Rng) -> String {
    loop {
        let n = rng.random_range(2..=4);
        let word: String = (0..n).map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())]).collect();
        if !all_stopwords().contains(word.as_str()) {
            return word;
        }
    }
}

fn language_word(rng: &mut ChaCha8Rng, lang: &str) -> String {
    let stop = stopwords(lang).unwrap_or(&[]);
    if !stop.is_empty() && rng.random_bool(0.5) {
        stop[rng.random_range(0..stop.len())].to_string()
    } else {
        filler(rng)
    }
}

fn external_href(host: &str, k: usize) -> String {
    match k % 5 {
        0 => format!("http://{host}/"),
        1 => format!("http://{host}/index.html"),
        2 => format!("https://{}:80/?ref=dir#top", host.to_ascii_uppercase()),
        3 => format!("//{host}/forum"),
        _ => format!("http://{host}"),
    }
}

/// Builds markup while tallying the visible text it emits.
struct PageWriter {
    html: String,
    stats: PageStats,
}

impl PageWriter {
    fn new() -> Self {
        PageWriter {
            html: String::with_capacity(2048),
            stats: PageStats::default(),
        }
    }

    fn raw(&mut self, s: &str) {
        self.html.push_str(s);
    }

    /// Visible tokens; callers only pass whitespace-free tokens.
    fn text(&mut self, tokens: &[String]) {
        for (i, t) in tokens.iter().enumerate() {
            if i > 0 {
                self.html.push(' ');
            }
            self.html.push_str(t);
            self.stats.words += 1;
            self.stats.letters += t.chars().filter(|c| c.is_alphabetic()).count() as u64;
        }
    }

    fn element(&mut self, open: &str, close: &str, tokens: &[String]) {
        self.raw(open);
        self.text(tokens);
        self.raw(close);
        self.raw("\n");
    }
}

pub(crate) struct HomeShape {
    pub words: u64,
    pub images: u64,
    pub scripts: u64,
}

pub(crate) fn sample_home_shape(rng: &mut ChaCha8Rng, mean_words: f64, mean_images: f64, mean_scripts: f64) -> HomeShape {
    let geo = |rng: &mut ChaCha8Rng, mean: f64| -> u64 {
        if mean <= 0.0 {
            0
        } else {
            Geometric::new(1.0 / (mean + 1.0)).map(|g| g.sample(rng)).unwrap_or(0)
        }
    };
    HomeShape {
        words: geo(rng, mean_words),
        images: geo(rng, mean_images),
        scripts: geo(rng, mean_scripts),
    }
}

/// Renders page `page` of `site`; returns the body and its visible-text
/// tally (images and scripts included).
pub(crate) fn render(
    seed: u64,
    site: &SimSite,
    page: u32,
    hosts: &dyn Fn(usize) -> String,
) -> (String, PageStats) {
    let mut rng = stream_rng(seed, "page", ((site.index as u64) << 32) | page as u64);
    let mut w = PageWriter::new();
    let lang = site.language.as_str();

    w.raw(&format!("<!DOCTYPE html>\n<html lang=\"{lang}\">\n<head>\n<meta charset=\"utf-8\">\n"));
    let title = vec![filler(&mut rng), filler(&mut rng)];
    w.element("<title>", "</title>", &title);
    w.raw("<style>body { font-family: serif; } .hidden { display: none }</style>\n");

    let (n_words, n_images, n_scripts) = if page == 0 {
        (site.home_shape.words, site.home_shape.images, site.home_shape.scripts)
    } else {
        (rng.random_range(3..40), rng.random_range(0..3), rng.random_range(0..2))
    };
    for s in 0..n_scripts {
        if s == 0 {
            // inline body must not count as text
            w.raw("<script>var greeting = \"the quick brown fox\"; console.log(greeting);</script>\n");
        } else {
            w.raw(&format!("<script src=\"/js/{s}.js\"></script>\n"));
        }
    }
    w.raw("</head>\n<body>\n");
    w.element("<h1>", "</h1>", &title);

    let words: Vec<String> = (0..n_words).map(|_| language_word(&mut rng, lang)).collect();
    if !words.is_empty() {
        w.element("<p>", "</p>", &words);
    }
    for i in 0..n_images {
        w.raw(&format!("<img src=\"/img/{page}-{i}.png\" alt=\"\">\n"));
    }

    w.raw("<ul class=\"nav\">\n");
    if page != 0 {
        w.element("<li><a href=\"/\">", "</a></li>", &["home".to_string()]);
        w.element(&format!("<li><a href=\"/p/{page}#top\">"), "</a></li>", &["top".to_string()]);
    }
    let first_child = FANOUT as u64 * page as u64 + 1;
    for child in first_child..first_child + FANOUT as u64 {
        if child >= site.pages as u64 {
            break;
        }
        w.element(&format!("<li><a href=\"/p/{child}\">"), "</a></li>", &[format!("p{child}")]);
    }
    if page == 0 && site.broken_link {
        w.element(&format!("<li><a href=\"/p/{}\">", site.pages), "</a></li>", &["missing".to_string()]);
    }
    w.raw("</ul>\n");

    let pages = site.pages.max(1) as usize;
    let mine: Vec<(usize, usize)> = site
        .out
        .iter()
        .enumerate()
        .filter(|(k, _)| k % pages == page as usize)
        .map(|(k, &t)| (k, t))
        .collect();
    if !mine.is_empty() {
        w.raw("<ul class=\"links\">\n");
        for (k, target) in mine {
            let host = hosts(target);
            w.element(
                &format!("<li><a href=\"{}\">", external_href(&host, k)),
                "</a></li>",
                &[host.clone()],
            );
            if k % 3 == 0 {
                w.element(&format!("<li><a href=\"http://{host}/about\">"), "</a></li>", &["about".to_string()]);
            }
        }
        w.raw("</ul>\n");
    }
    if page == 0 {
        for url in &site.surface {
            w.element(&format!("<p><a href=\"{url}\">"), "</a></p>", &["clearnet".to_string()]);
        }
    }
    w.raw("<!-- generated page, words in comments are not text -->\n</body>\n</html>\n");

    let mut stats = w.stats;
    stats.images = n_images;
    stats.scripts = n_scripts;
    (w.html, stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn page_paths_round_trip() {
        for p in [0, 1, 7, 20_629] {
            assert_eq!(parse_page_path(&page_path(p), 20_630), Some(p));
        }
        assert_eq!(parse_page_path("/p/20630", 20_630), None);
        assert_eq!(parse_page_path("/p/0", 10), None);
        assert_eq!(parse_page_path("/p/01", 10), None);
        assert_eq!(parse_page_path("/p/3?x=1", 10), None);
        assert_eq!(parse_page_path("/p/3#frag", 10), Some(3));
        assert_eq!(parse_page_path("/other", 10), None);
    }

    #[test]
    fn filler_never_collides_with_stopwords() {
        let mut rng = stream_rng(1, "t", 0);
        for _ in 0..5_000 {
            let w = filler(&mut rng);
            assert!(!all_stopwords().contains(w.as_str()));
        }
    }
}
