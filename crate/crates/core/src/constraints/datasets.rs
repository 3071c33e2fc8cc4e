//! Rule sets for the CORD, WildReceipt and DocILE label schemes.

use std::fmt;
use std::str::FromStr;

use super::rules::{ArithmeticRule, Expr, FieldSpec, RuleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dataset {
    Cord,
    WildReceipt,
    Docile,
}

impl Dataset {
    pub const ALL: [Dataset; 3] = [Dataset::Cord, Dataset::WildReceipt, Dataset::Docile];

    pub fn name(self) -> &'static str {
        match self {
            Dataset::Cord => "cord",
            Dataset::WildReceipt => "wildreceipt",
            Dataset::Docile => "docile",
        }
    }

    pub fn rule_set(self) -> RuleSet {
        match self {
            Dataset::Cord => cord(),
            Dataset::WildReceipt => wildreceipt(),
            Dataset::Docile => docile(),
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dataset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dataset::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| format!("unknown dataset {s:?} (expected cord, wildreceipt or docile)"))
    }
}

fn f(name: &str) -> Expr {
    Expr::field(name)
}

pub mod cord_fields {
    pub const MENU_SUB_PRICE: &str = "menu.sub.price";
    pub const SUBTOTAL: &str = "sub_total.subtotal_price";
    pub const TAX: &str = "sub_total.tax_price";
    pub const SERVICE: &str = "sub_total.service_price";
    pub const DISCOUNT: &str = "sub_total.discount_price";
    pub const TOTAL: &str = "total.total_price";
    pub const CASH: &str = "total.cashprice";
    pub const CHANGE: &str = "total.changeprice";
}

pub mod wildreceipt_fields {
    pub const TOTAL: &str = "total_value";
    pub const SUBTOTAL: &str = "subtotal_value";
    pub const TAX: &str = "tax_value";
    pub const PROD_PRICE: &str = "prod_price_value";
}

pub mod docile_fields {
    pub const GROSS: &str = "amount_total_gross";
    pub const NET: &str = "amount_total_net";
    pub const TAX: &str = "amount_total_tax";
    pub const DUE: &str = "amount_due";
    pub const PAID: &str = "amount_paid";
}

fn cord() -> RuleSet {
    use cord_fields::*;
    RuleSet {
        name: "cord".into(),
        require_bio: true,
        fields: vec![
            // Summed over menu items.
            FieldSpec::mandatory(MENU_SUB_PRICE).summed(),
            FieldSpec::mandatory(SUBTOTAL),
            FieldSpec::mandatory(TAX),
            FieldSpec::optional(SERVICE),
            FieldSpec::optional(DISCOUNT),
            FieldSpec::mandatory(TOTAL),
            FieldSpec::mandatory(CASH),
            FieldSpec::mandatory(CHANGE),
        ],
        rules: vec![
            ArithmeticRule::new(MENU_SUB_PRICE, f(SUBTOTAL)),
            ArithmeticRule::new(TAX, f(SUBTOTAL).add(f(SERVICE)).scale(0.1)),
            ArithmeticRule::new(CASH, f(TOTAL).add(f(CHANGE))),
            ArithmeticRule::new(TOTAL, f(SUBTOTAL).add(f(TAX)).add(f(SERVICE)).sub(f(DISCOUNT))),
        ],
    }
}

fn wildreceipt() -> RuleSet {
    use wildreceipt_fields::*;
    RuleSet {
        name: "wildreceipt".into(),
        require_bio: true,
        fields: vec![
            FieldSpec::mandatory(TOTAL),
            FieldSpec::mandatory(SUBTOTAL),
            FieldSpec::mandatory(TAX),
            FieldSpec::mandatory(PROD_PRICE).summed(),
        ],
        rules: vec![ArithmeticRule::new(TOTAL, f(SUBTOTAL).add(f(TAX))), ArithmeticRule::new(SUBTOTAL, f(PROD_PRICE))],
    }
}

fn docile() -> RuleSet {
    use docile_fields::*;
    RuleSet {
        name: "docile".into(),
        require_bio: true,
        fields: vec![
            FieldSpec::mandatory(GROSS),
            FieldSpec::mandatory(NET),
            FieldSpec::mandatory(TAX),
            FieldSpec::mandatory(DUE),
            FieldSpec::mandatory(PAID),
        ],
        rules: vec![ArithmeticRule::new(GROSS, f(NET).add(f(TAX))), ArithmeticRule::new(DUE, f(PAID).add(f(GROSS)))],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::rules::FieldKind;

    #[test]
    fn rule_counts() {
        assert_eq!(Dataset::Cord.rule_set().rules.len(), 4);
        assert_eq!(Dataset::WildReceipt.rule_set().rules.len(), 2);
        assert_eq!(Dataset::Docile.rule_set().rules.len(), 2);
        for d in Dataset::ALL {
            let set = d.rule_set();
            assert!(set.require_bio);
            for rule in &set.rules {
                for field in rule.fields() {
                    assert!(set.field(field).is_some(), "{d}: {field}");
                }
            }
            assert_eq!(d.name().parse::<Dataset>().unwrap(), d);
        }
        assert!("sroie".parse::<Dataset>().is_err());
    }

    #[test]
    fn cord_optional_fields_are_the_starred_ones() {
        let set = Dataset::Cord.rule_set();
        let optional: Vec<&str> =
            set.fields.iter().filter(|s| s.kind == FieldKind::Optional).map(|s| s.name.as_str()).collect();
        assert_eq!(optional, [cord_fields::SERVICE, cord_fields::DISCOUNT]);
    }
}
