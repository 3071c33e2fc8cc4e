//! Seeded synthetic receipts whose gold labels satisfy a dataset's rule set.
//!
//! Each document is a receipt or invoice with amounts generated to satisfy
//! the arithmetic rules, padded with filler text. The model output is
//! simulated: the gold label gets logit 0 and every other label a logit in
//! `[-8, -4]`. With probability `noise` a token is flipped: one other label
//! gets a logit in `(0.05, 1)`, so it becomes the argmax while the gold
//! label stays a close second.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::constraints::datasets::{cord_fields, docile_fields, wildreceipt_fields};
use crate::constraints::{Dataset, Token};
use crate::corpus::DocRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub docs: usize,
    pub tokens_per_doc: usize,
    /// Per-token probability that the argmax differs from the gold label.
    pub noise: f64,
    pub dataset: Dataset,
    pub seed: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SyntheticError {
    #[error("noise must be in [0, 1], got {0}")]
    Noise(f64),
}

/// `O` followed by `B-`/`I-` labels for every field of the dataset.
pub fn label_vocab(dataset: Dataset) -> Vec<String> {
    let mut vocab = vec!["O".to_string()];
    for field in dataset.rule_set().fields {
        vocab.push(format!("B-{}", field.name));
        vocab.push(format!("I-{}", field.name));
    }
    vocab
}

/// Formats cents as `1,234.50`.
pub fn format_cents(cents: i64) -> String {
    let units = (cents.abs() / 100).to_string();
    let mut grouped = String::new();
    for (i, c) in units.chars().enumerate() {
        if i > 0 && (units.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(c);
    }
    let sign = if cents < 0 { "-" } else { "" };
    format!("{sign}{grouped}.{:02}", cents.abs() % 100)
}

const ITEMS: &[&str] = &[
    "NASI GORENG",
    "ES TEH",
    "KOPI SUSU",
    "AYAM BAKAR",
    "MIE AYAM",
    "ROTI BAKAR",
    "CAPPUCCINO",
    "TEA",
    "BURGER",
    "FRIES",
    "SALAD",
    "PASTA",
    "JUICE",
    "WATER",
];
const FILLER: &[&str] = &[
    "THANK",
    "YOU",
    "WELCOME",
    "STORE",
    "JL.",
    "SUDIRMAN",
    "NO.",
    "12",
    "TABLE",
    "7",
    "CASHIER",
    "ANNA",
    "12/05/2024",
    "14:32",
    "INVOICE",
    "#1023",
    "TEL",
    "021-555",
    "PLEASE",
    "COME",
    "AGAIN",
    "MEMBER",
    "-",
    "*",
    "VAT",
    "REG",
    "2",
];

struct Builder {
    tokens: Vec<Token>,
    gold: Vec<String>,
}

impl Builder {
    fn words(&mut self, text: &str) {
        for w in text.split_whitespace() {
            self.tokens.push(Token::new(w));
            self.gold.push("O".into());
        }
    }

    /// The amount split into digit groups and separators, e.g. `1` `,` `234` `.` `50`.
    fn amount(&mut self, field: &str, cents: i64) {
        let text = format_cents(cents);
        let mut pieces: Vec<String> = Vec::new();
        for c in text.chars() {
            let digit = c.is_ascii_digit() || c == '-';
            match pieces.last_mut() {
                Some(last) if digit && last.chars().all(|d| d.is_ascii_digit() || d == '-') => last.push(c),
                _ => pieces.push(c.to_string()),
            }
        }
        for (i, p) in pieces.into_iter().enumerate() {
            self.tokens.push(if i == 0 { Token::new(p) } else { Token::joined(p) });
            self.gold.push(format!("{}-{field}", if i == 0 { "B" } else { "I" }));
        }
    }

    fn line(&mut self, keyword: &str, field: &str, cents: i64) {
        self.words(keyword);
        self.amount(field, cents);
    }
}

fn price(rng: &mut ChaCha8Rng) -> i64 {
    rng.gen_range(10..=2000) * 50
}

fn items(b: &mut Builder, rng: &mut ChaCha8Rng, field: &str) -> i64 {
    let mut sum = 0;
    for _ in 0..rng.gen_range(1..=4) {
        let p = price(rng);
        sum += p;
        b.words(ITEMS.choose(rng).expect("items"));
        b.words(&format!("{}x", rng.gen_range(1..=3)));
        b.amount(field, p);
    }
    sum
}

fn body(dataset: Dataset, rng: &mut ChaCha8Rng) -> Builder {
    let mut b = Builder { tokens: Vec::new(), gold: Vec::new() };
    match dataset {
        Dataset::Cord => {
            use cord_fields::*;
            let subtotal = items(&mut b, rng, MENU_SUB_PRICE);
            let service = if rng.gen_bool(0.5) { (subtotal * 5 + 50) / 100 } else { 0 };
            let tax = (subtotal + service + 5) / 10;
            let discount = if rng.gen_bool(0.3) { rng.gen_range(1..=subtotal / 5) } else { 0 };
            let total = subtotal + tax + service - discount;
            let cash = (total / 5000 + rng.gen_range(1..=3)) * 5000;
            b.line("SUBTOTAL", SUBTOTAL, subtotal);
            if service > 0 {
                b.line("SERVICE", SERVICE, service);
            }
            b.line("TAX", TAX, tax);
            if discount > 0 {
                b.line("DISCOUNT", DISCOUNT, discount);
            }
            b.line("TOTAL", TOTAL, total);
            b.line("CASH", CASH, cash);
            b.line("CHANGE", CHANGE, cash - total);
        }
        Dataset::WildReceipt => {
            use wildreceipt_fields::*;
            let subtotal = items(&mut b, rng, PROD_PRICE);
            let rate = *[5, 8, 10].choose(rng).expect("rates");
            let tax = (subtotal * rate + 50) / 100;
            b.line("SUBTOTAL", SUBTOTAL, subtotal);
            b.line("TAX", TAX, tax);
            b.line("TOTAL", TOTAL, subtotal + tax);
        }
        Dataset::Docile => {
            use docile_fields::*;
            let net = rng.gen_range(1000..=500_000);
            let tax = (net * 20 + 50) / 100;
            let gross = net + tax;
            let paid = rng.gen_range(0..=gross);
            b.line("NET AMOUNT", NET, net);
            b.line("VAT 20%", TAX, tax);
            b.line("TOTAL GROSS", GROSS, gross);
            b.line("PAID", PAID, paid);
            b.line("AMOUNT DUE", DUE, paid + gross);
        }
    }
    b
}

fn filler(rng: &mut ChaCha8Rng, count: usize) -> Vec<Token> {
    (0..count).map(|_| Token::new(*FILLER.choose(rng).expect("filler"))).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z = logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|x| x - z).collect()
}

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Vec<DocRecord>, SyntheticError> {
    if !(0.0..=1.0).contains(&spec.noise) {
        return Err(SyntheticError::Noise(spec.noise));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vocab = label_vocab(spec.dataset);
    let l = vocab.len();
    let mut out = Vec::with_capacity(spec.docs);
    for d in 0..spec.docs {
        let b = body(spec.dataset, &mut rng);
        let pad = spec.tokens_per_doc.saturating_sub(b.tokens.len());
        let head = pad / 2;
        let mut tokens = filler(&mut rng, head);
        tokens.extend(b.tokens);
        tokens.extend(filler(&mut rng, pad - head));
        let mut gold = vec!["O".to_string(); head];
        gold.extend(b.gold);
        gold.resize(tokens.len(), "O".to_string());

        let rows: Vec<Vec<f64>> = gold
            .iter()
            .map(|g| {
                let g = vocab.iter().position(|v| v == g).expect("gold label in vocabulary");
                let mut logits: Vec<f64> = (0..l).map(|_| -4.0 - 4.0 * rng.gen::<f64>()).collect();
                logits[g] = 0.0;
                if rng.gen_bool(spec.noise) {
                    let mut c = rng.gen_range(0..l - 1);
                    if c >= g {
                        c += 1;
                    }
                    logits[c] = rng.gen_range(0.05..1.0);
                }
                log_softmax(&logits)
            })
            .collect();
        let mut record = DocRecord {
            doc_id: format!("{}-{d:05}", spec.dataset),
            tokens,
            label_vocab: vocab.clone(),
            probs: Vec::new(),
            probs_are_log: true,
            gold_labels: Some(gold),
            locale: None,
        };
        record.set_log_probs(&rows);
        out.push(record);
    }
    Ok(out)
}
