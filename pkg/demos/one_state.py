"""
One state, end to end
=====================

Generate a synthetic cohort, see which attributes survive clustering,
cross-validate the four-member ensemble and read rules off its CART member.
"""
import numpy as np

from upm.ensemble import PipelineConfig, train_upm
from upm.evaluate import cross_validate
from upm.preprocess import PrepConfig, apply_transform, fit_preprocessing
from upm.rules import extract_rules, format_rules
from upm.synthgen import CohortSpec, generate_cohort

# Rajasthan has 178 students in the state table
ds, truth = generate_cohort(CohortSpec("Rajasthan", 178, seed=7))
print(ds.n, "students,", ds.n_attributes, "attributes,", f"{100 * truth.realized_positive_rate:.1f}% placed")
print("best attainable accuracy on these labels:", round(truth.realized_bayes_accuracy, 2))

# attribute clustering keeps one representative per group of correlated columns
reduced, transform, clusters = fit_preprocessing(ds, PrepConfig(), seed=1)
print(clusters.k_used, "clusters; kept:", ", ".join(reduced.attribute_names))

# ten-fold CV; the preprocessing is refitted inside every fold
cfg = PipelineConfig()
report = cross_validate(ds, cfg)
print(f"accuracy {report.accuracy_pct:.2f}  weighted F1 {report.f1_weighted_pct:.2f}  kappa {report.kappa:.3f}")
print("pooled confusion (rows actual, columns predicted):")
print(report.confusion.counts)

# the whole-cohort model, and the rules its pruned CART tree encodes
model = train_upm(ds, cfg)
rules = extract_rules(model.cart, apply_transform(model.transform, ds), model.transform)
print(format_rules(rules, "text"))

labels, _ = model.predict_batch(ds)
print("training accuracy of the ensemble:", np.mean(labels == ds.labels))
