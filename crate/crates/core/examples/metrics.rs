//! Specificity, sensitivity and their mean from label lists.

use respkit::dataio::Label;
use respkit::metrics::{confusion, icbhi_scores};

fn main() -> anyhow::Result<()> {
    use Label::*;
    let truth = [Normal, Normal, Normal, Normal, Crackle, Crackle, Wheeze, Both];
    let predicted = [Normal, Normal, Normal, Crackle, Crackle, Normal, Both, Both];
    let index = |ls: &[Label]| ls.iter().map(|l| l.index()).collect::<Vec<_>>();
    let counts = confusion(&index(&truth), &index(&predicted))?;
    let report = icbhi_scores(&counts)?;
    // A wheeze predicted as "both" is a miss: only exact class matches count.
    print!("{}", report.to_markdown("example"));
    println!("\n{}", report.to_json()?);
    Ok(())
}
