//! Recomputes the composite score of each benchmark row and prints the table.

use roadscene::eval::{published_rows, render_report, verify_published_rows};

fn main() {
    print!("{}", render_report(&published_rows()).human);
    for c in verify_published_rows() {
        let status = if c.pass { "ok" } else { "MISMATCH" };
        println!("{:<18} {:.4} vs {:.2}  {status}", c.model_tag, c.recomputed, c.published);
    }
}
