//! The fifteen source-level manipulations. Each locates its targets with the
//! HTML lexer/tree and rewrites byte spans; a manipulation whose targets are
//! missing returns the page unchanged with a note.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use url::Url;

use super::edit::{self, Editor, IdGen};
use super::{HidingStrategy, Manipulation, ManipulationId, ObfuscationStyle};
use crate::css;
use crate::encoding::base64_encode;
use crate::html::{self, Dom, Token};
use crate::parser::{self, ActionClass};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManipulationOutcome {
    pub html: String,
    pub applied: bool,
    pub edits: usize,
    pub note: Option<String>,
}

const INTERNAL_TEXT: &[&str] = &[
    "Home", "About us", "Contact", "Privacy policy", "Terms of service", "Help center", "Careers",
    "Press", "Blog", "Support", "Site map", "Accessibility",
];
const INTERNAL_PATHS: &[&str] =
    &["/about", "/contact", "/privacy", "/terms", "/help", "/careers", "/press", "/blog", "/support", "/sitemap"];
const EXTERNAL_LINKS: &[(&str, &str)] = &[
    ("https://www.wikipedia.org/", "Wikipedia"),
    ("https://www.google.com/", "Google"),
    ("https://www.microsoft.com/", "Microsoft"),
    ("https://www.apple.com/", "Apple"),
    ("https://www.github.com/", "GitHub"),
    ("https://www.mozilla.org/", "Mozilla"),
    ("https://www.bbc.co.uk/", "BBC"),
    ("https://www.nytimes.com/", "New York Times"),
];
const IFRAME_SOURCES: &[&str] = &[
    "https://www.youtube.com/embed/aqz-KE-bpKQ",
    "https://www.google.com/maps/embed?pb=1",
    "https://player.vimeo.com/video/76979871",
];
const FILLER: &[&str] = &[
    "Loading content", "Latest updates", "Our partners", "Customer stories", "Featured articles",
    "Community news", "Frequently asked questions",
];

struct Ctx<'a> {
    src: &'a str,
    url: &'a str,
    tokens: Vec<Token>,
    dom: Dom,
    edits: Editor,
    rng: ChaCha8Rng,
    strategy: HidingStrategy,
    hide_class: Option<String>,
    ids: IdGen<'a>,
}

impl<'a> Ctx<'a> {
    fn new(src: &'a str, url: &'a str, m: &Manipulation) -> Self {
        let seed = m.params.seed ^ (m.id as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        Ctx {
            src,
            url,
            tokens: html::tokenize(src),
            dom: Dom::parse(src),
            edits: Editor::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            strategy: m.params.strategy,
            hide_class: None,
            ids: IdGen::new(src, "ps-"),
        }
    }

    fn body_end(&self) -> usize {
        edit::body_end(&self.tokens, self.src)
    }

    fn pick<'b>(&mut self, items: &'b [&'b str]) -> &'b str {
        items.choose(&mut self.rng).copied().unwrap_or_default()
    }

    /// Markup for `<tag attrs>inner</tag>` kept off screen by the strategy.
    fn hidden(&mut self, tag: &str, attrs: &str, inner: &str) -> String {
        let attrs = if attrs.is_empty() { String::new() } else { format!(" {attrs}") };
        match self.strategy {
            HidingStrategy::S1 => format!("<{tag} hidden{attrs}>{inner}</{tag}>"),
            HidingStrategy::S2 => format!("<{tag} style=\"display:none\"{attrs}>{inner}</{tag}>"),
            HidingStrategy::S3 => {
                let cls = self.hide_class();
                format!("<{tag} class=\"{cls}\"{attrs}>{inner}</{tag}>")
            }
            HidingStrategy::S4 => format!("<noscript><{tag}{attrs}>{inner}</{tag}></noscript>"),
        }
    }

    fn hide_class(&mut self) -> String {
        if let Some(c) = &self.hide_class {
            return c.clone();
        }
        let cls = self.ids.fresh();
        let rule = format!("<style>.{cls}{{display:none}}</style>");
        match edit::end_tag_pos(&self.tokens, "head") {
            Some(p) => self.edits.insert(p, rule),
            None => {
                let p = self.body_end();
                self.edits.insert(p, rule);
            }
        }
        self.hide_class = Some(cls.clone());
        cls
    }

    fn page_host(&self) -> Option<String> {
        Url::parse(self.url).ok().and_then(|u| u.host_str().map(str::to_ascii_lowercase))
    }

    fn is_internal_link(&self, href: &str) -> bool {
        let h = href.trim();
        if h.is_empty() || h.starts_with('#') {
            return false;
        }
        match Url::parse(h) {
            Ok(u) => matches!(u.scheme(), "http" | "https") && u.host_str().map(str::to_ascii_lowercase) == self.page_host(),
            Err(url::ParseError::RelativeUrlWithoutBase) => !h.starts_with("//"),
            Err(_) => false,
        }
    }

    fn is_external_link(&self, href: &str) -> bool {
        match Url::parse(href.trim()) {
            Ok(u) => {
                matches!(u.scheme(), "http" | "https")
                    && u.host_str().is_some_and(|h| Some(h.to_ascii_lowercase()) != self.page_host())
            }
            Err(_) => href.trim().starts_with("//"),
        }
    }

    /// Existing id of node `i`, or a fresh one inserted into its start tag.
    fn ensure_id(&mut self, i: usize) -> String {
        let node = &self.dom.nodes[i];
        if let Some(id) = node.attr("id").filter(|v| !v.trim().is_empty()) {
            return id.to_string();
        }
        let at = edit::after_tag_name(self.src, node.start_tag.0, &node.name);
        let id = self.ids.fresh();
        self.edits.insert(at, format!(" id=\"{id}\""));
        id
    }

    fn finish(self, note_if_noop: &str) -> ManipulationOutcome {
        if self.edits.is_empty() {
            return ManipulationOutcome {
                html: self.src.to_string(),
                applied: false,
                edits: 0,
                note: Some(note_if_noop.to_string()),
            };
        }
        let n = self.edits.len();
        let html = self.edits.apply(self.src);
        let applied = html != self.src;
        ManipulationOutcome { html, applied, edits: n, note: None }
    }
}

fn load_script(statements: &[String]) -> String {
    format!(
        "<script>window.addEventListener('load', function () {{ {} }});</script>",
        statements.join(" ")
    )
}

/// Apply one manipulation to `html` served from `url`.
pub fn apply_manipulation(html: &str, url: &str, m: &Manipulation) -> ManipulationOutcome {
    let mut cx = Ctx::new(html, url, m);
    let count = m.params.count.max(1);
    match m.id {
        ManipulationId::A1 => {
            let mut out = String::new();
            for _ in 0..count {
                let text = cx.pick(INTERNAL_TEXT);
                out.push_str(&cx.hidden("a", "href=\"#local\"", text));
            }
            let at = cx.body_end();
            cx.edits.insert(at, out);
            cx.finish("")
        }
        ManipulationId::A2 | ManipulationId::A5 => {
            let mut items = Vec::new();
            for _ in 0..count {
                let (href, text) = if m.id == ManipulationId::A2 {
                    ("#local".to_string(), cx.pick(INTERNAL_TEXT).to_string())
                } else {
                    let (u, t) = EXTERNAL_LINKS[cx.rng.gen_range(0..EXTERNAL_LINKS.len())];
                    (u.to_string(), t.to_string())
                };
                items.push((href, text));
            }
            inject_in_footer(&mut cx, |cx, hide| {
                items
                    .iter()
                    .map(|(h, t)| {
                        let attrs = format!("href=\"{h}\"");
                        if hide {
                            cx.hidden("a", &attrs, t)
                        } else {
                            format!("<a {attrs}>{t}</a>")
                        }
                    })
                    .collect()
            });
            cx.finish("")
        }
        ManipulationId::A3 => {
            let mut lis = String::new();
            for _ in 0..count {
                let path = cx.pick(INTERNAL_PATHS);
                let text = cx.pick(INTERNAL_TEXT);
                lis.push_str(&format!("<li><a href=\"{path}\">{text}</a></li>"));
            }
            let block = cx.hidden("div", "", &format!("<ul>{lis}</ul>"));
            let at = cx.body_end();
            cx.edits.insert(at, block);
            cx.finish("")
        }
        ManipulationId::A4 => {
            let mut out = String::new();
            for _ in 0..count {
                let (u, t) = EXTERNAL_LINKS[cx.rng.gen_range(0..EXTERNAL_LINKS.len())];
                out.push_str(&cx.hidden("a", &format!("href=\"{u}\""), t));
            }
            let at = cx.body_end();
            cx.edits.insert(at, out);
            cx.finish("")
        }
        ManipulationId::A6 => update_form(&mut cx).unwrap_or_else(|| cx.finish("no form with a non-sink action")),
        ManipulationId::A7 => obfuscate_ext_links(&mut cx).unwrap_or_else(|| cx.finish("no external link or form target")),
        ManipulationId::A8 => {
            obfuscate_scripts(&mut cx, m.params.obfuscation);
            cx.finish("no inline script")
        }
        ManipulationId::A9 => {
            let year = 2019 + cx.rng.gen_range(0..6);
            let owner = cx.page_host().unwrap_or_else(|| "This site".to_string());
            let text = format!("&copy; {year} {owner}. All rights reserved.");
            inject_in_footer(&mut cx, |cx, hide| {
                if hide {
                    vec![cx.hidden("p", "", &text)]
                } else {
                    vec![format!("<p>{text}</p>")]
                }
            });
            cx.finish("")
        }
        ManipulationId::A10 => update_int_anchors(&mut cx).unwrap_or_else(|| cx.finish("no internal anchor")),
        ManipulationId::A11 => {
            update_hidden_divs(&mut cx, count);
            cx.finish("")
        }
        ManipulationId::A12 => {
            update_hidden_buttons(&mut cx);
            cx.finish("no disabled button")
        }
        ManipulationId::A13 => {
            let targets: Vec<(usize, usize)> = cx
                .dom
                .find_all("input")
                .filter_map(|i| {
                    let a = cx.dom.nodes[i].attrs.iter().find(|a| a.name == "type")?;
                    a.value.trim().eq_ignore_ascii_case("hidden").then_some(a.span)
                })
                .collect();
            for span in targets {
                cx.edits.replace(span, "type=\"text\" hidden");
            }
            cx.finish("no hidden input")
        }
        ManipulationId::A14 => {
            update_title(&mut cx);
            cx.finish("no title text")
        }
        ManipulationId::A15 => {
            update_iframes(&mut cx, count.min(2));
            cx.finish("")
        }
    }
}

/// Put elements in the existing footer (individually hidden) or in a new
/// hidden footer before the end of the body.
fn inject_in_footer(cx: &mut Ctx<'_>, make: impl FnOnce(&mut Ctx<'_>, bool) -> Vec<String>) {
    let footer = cx.dom.find_all("footer").next();
    match footer.and_then(|_| edit::end_tag_pos(&cx.tokens, "footer")) {
        Some(at) => {
            let items = make(cx, true).concat();
            cx.edits.insert(at, items);
        }
        None => {
            let inner = make(cx, false).concat();
            let block = cx.hidden("footer", "", &inner);
            let at = cx.body_end();
            cx.edits.insert(at, block);
        }
    }
}

fn update_form(cx: &mut Ctx<'_>) -> Option<ManipulationOutcome> {
    let forms: Vec<usize> = cx.dom.find_all("form").collect();
    let mut restore = Vec::new();
    for f in forms {
        let Some(action) = cx.dom.nodes[f].attrs.iter().find(|a| a.name == "action").cloned() else { continue };
        if parser::validate_form_action(&action.value, cx.url) == ActionClass::InternalSection {
            continue;
        }
        let id = cx.ensure_id(f);
        cx.edits.replace(action.span, "action=\"#!\"");
        restore.push(format!(
            "document.getElementById({}).action = {};",
            edit::js_string(&id),
            edit::js_string(&action.value)
        ));
    }
    if restore.is_empty() {
        return None;
    }
    let at = cx.body_end();
    cx.edits.insert(at, load_script(&restore));
    None
}

fn obfuscate_ext_links(cx: &mut Ctx<'_>) -> Option<ManipulationOutcome> {
    let mut restore = Vec::new();
    let targets: Vec<(usize, &'static str)> = cx
        .dom
        .preorder()
        .into_iter()
        .filter_map(|i| match cx.dom.nodes[i].name.as_str() {
            "a" | "area" => Some((i, "href")),
            "form" => Some((i, "action")),
            _ => None,
        })
        .collect();
    for (i, attr) in targets {
        let Some(a) = cx.dom.nodes[i].attrs.iter().find(|a| a.name == attr).cloned() else { continue };
        if !cx.is_external_link(&a.value) {
            continue;
        }
        let id = cx.ensure_id(i);
        cx.edits.replace(a.span, format!("{attr}=\"#!\""));
        restore.push(format!(
            "document.getElementById({}).{attr} = atob({});",
            edit::js_string(&id),
            edit::js_string(&base64_encode(&a.value))
        ));
    }
    if restore.is_empty() {
        return None;
    }
    let at = cx.body_end();
    cx.edits.insert(at, load_script(&restore));
    None
}

fn is_js_type(t: Option<&str>) -> bool {
    match t.map(|t| t.trim().to_ascii_lowercase()) {
        None => true,
        Some(t) => t.is_empty() || t.contains("javascript") || t.contains("ecmascript") || t == "module",
    }
}

fn obfuscate_scripts(cx: &mut Ctx<'_>, style: ObfuscationStyle) {
    let scripts: Vec<usize> = cx.dom.find_all("script").collect();
    for s in scripts {
        let node = &cx.dom.nodes[s];
        if node.has_attr("src") || !is_js_type(node.attr("type")) {
            continue;
        }
        let Some(body) = cx.dom.raw_body(s) else { continue };
        let text = &cx.src[body.0..body.1];
        if text.trim().is_empty() {
            continue;
        }
        let b64 = base64_encode(text);
        let wrapped = match style {
            ObfuscationStyle::Indirect => format!("var _p=\"{b64}\";eval(atob(_p));"),
            ObfuscationStyle::Direct => format!("eval(atob(\"{b64}\"))"),
        };
        cx.edits.replace(body, wrapped);
    }
}

fn update_int_anchors(cx: &mut Ctx<'_>) -> Option<ManipulationOutcome> {
    let anchors: Vec<usize> = cx.dom.find_all("a").collect();
    let mut restore = Vec::new();
    for i in anchors {
        let Some(a) = cx.dom.nodes[i].attrs.iter().find(|a| a.name == "href").cloned() else { continue };
        if !cx.is_internal_link(&a.value) {
            continue;
        }
        let lower = a.value.trim().to_ascii_lowercase();
        if lower.starts_with("javascript:") || lower.starts_with("mailto:") || lower.starts_with("tel:") {
            continue;
        }
        let id = cx.ensure_id(i);
        cx.edits.replace(a.span, "href=\"#!\"");
        restore.push(format!("document.getElementById({}).href = {};", edit::js_string(&id), edit::js_string(&a.value)));
    }
    if restore.is_empty() {
        return None;
    }
    let at = cx.body_end();
    cx.edits.insert(at, load_script(&restore));
    None
}

fn stylesheet(cx: &Ctx<'_>) -> Vec<css::StyleRule> {
    cx.dom
        .find_all("style")
        .filter_map(|i| cx.dom.raw_body(i))
        .flat_map(|(s, e)| css::parse_stylesheet(&cx.src[s..e]))
        .collect()
}

fn update_hidden_divs(cx: &mut Ctx<'_>, count: usize) {
    let rules = stylesheet(cx);
    let divs: Vec<usize> = cx.dom.find_all("div").collect();
    for d in divs {
        let node = &cx.dom.nodes[d];
        let Some(cause) = parser::hiding_cause(node, &rules) else { continue };
        let hidden_attr = node.attrs.iter().find(|a| a.name == "hidden").cloned();
        let style_attr = node.attrs.iter().find(|a| a.name == "style").cloned();
        match (cause, hidden_attr, style_attr) {
            // hidden attribute -> inline style
            (_, Some(h), None) => cx.edits.replace(h.span, "style=\"display:none\""),
            (_, Some(h), Some(st)) => {
                cx.edits.replace(h.span, "");
                cx.edits.replace(st.span, format!("style=\"{};display:none\"", html::escape_attr(&st.value)));
            }
            // inline display:none -> hidden attribute
            (_, None, Some(st)) if css::has_display_none(&st.value) => {
                let rest: Vec<String> = css::declarations(&st.value)
                    .filter(|(p, _)| p != "display")
                    .map(|(p, v)| format!("{p}:{v}"))
                    .collect();
                if rest.is_empty() {
                    cx.edits.replace(st.span, "hidden");
                } else {
                    cx.edits.replace(st.span, format!("hidden style=\"{}\"", rest.join(";")));
                }
            }
            // stylesheet rule -> also carry the attribute
            _ => {
                let at = edit::after_tag_name(cx.src, node.start_tag.0, "div");
                cx.edits.insert(at, " hidden");
            }
        }
    }
    let mut out = String::new();
    for _ in 0..count {
        let text = cx.pick(FILLER);
        out.push_str(&cx.hidden("div", "", text));
    }
    let at = cx.body_end();
    cx.edits.insert(at, out);
}

fn update_hidden_buttons(cx: &mut Ctx<'_>) {
    let buttons: Vec<usize> = cx.dom.find_all("button").filter(|&b| cx.dom.nodes[b].has_attr("disabled")).collect();
    let mut restore = Vec::new();
    for b in buttons {
        let span = cx.dom.nodes[b].attrs.iter().find(|a| a.name == "disabled").map(|a| a.span).unwrap();
        let id = cx.ensure_id(b);
        cx.edits.replace(span, "");
        restore.push(format!("document.getElementById({}).setAttribute('disabled', '');", edit::js_string(&id)));
    }
    if !restore.is_empty() {
        let at = cx.body_end();
        cx.edits.insert(at, format!("<script>{}</script>", restore.join(" ")));
    }
}

fn update_title(cx: &mut Ctx<'_>) {
    let Some(t) = cx.dom.find_all("title").next() else { return };
    let Some(body) = cx.dom.raw_body(t) else { return };
    let original = html::decode_entities(&cx.src[body.0..body.1]).trim().to_string();
    if original.is_empty() {
        return;
    }
    cx.edits.replace(body, "Welcome");
    let at = cx.body_end();
    cx.edits.insert(at, format!("<script>document.title = {};</script>", edit::js_string(&original)));
}

fn update_iframes(cx: &mut Ctx<'_>, inject: usize) {
    let rules = stylesheet(cx);
    let frames: Vec<usize> = cx.dom.find_all("iframe").collect();
    for f in frames {
        let node = &cx.dom.nodes[f];
        let hidden = std::iter::once(f)
            .chain(cx.dom.ancestors(f))
            .any(|n| parser::hiding_cause(&cx.dom.nodes[n], &rules).is_some());
        if !hidden {
            continue;
        }
        let src = IFRAME_SOURCES[cx.rng.gen_range(0..IFRAME_SOURCES.len())];
        match node.attrs.iter().find(|a| a.name == "src") {
            Some(a) => cx.edits.replace(a.span, format!("src=\"{src}\"")),
            None => {
                let at = edit::after_tag_name(cx.src, node.start_tag.0, "iframe");
                cx.edits.insert(at, format!(" src=\"{src}\""));
            }
        }
    }
    let mut out = String::new();
    for _ in 0..inject {
        let src = IFRAME_SOURCES[cx.rng.gen_range(0..IFRAME_SOURCES.len())];
        out.push_str(&cx.hidden("iframe", &format!("src=\"{src}\" width=\"0\" height=\"0\""), ""));
    }
    let at = cx.body_end();
    cx.edits.insert(at, out);
}
