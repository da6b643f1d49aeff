"""Walk through the seven-dimension taxonomy and annotation canonicalization.

Raw annotations come out of a prompt with `broken`/`broken_reason` fields, a
separate context-sufficiency judgment, multi-valued durations, and a
followup=No option. Canonicalization folds all of that into the released
label space and flags ambiguous dual-duration facts for exclusion.
"""

from factkit import (
    DIMENSIONS,
    LABEL_SPACE,
    RawAnnotation,
    canonicalize,
    validate_labelset,
)

print("The seven dimensions and their label spaces:")
for dim in DIMENSIONS:
    labels = LABEL_SPACE[dim]
    print(f"  {dim.value:<20} ({len(labels)}) {', '.join(labels)}")

print("\n--- a plain valid fact ---")
raw = RawAnnotation(
    main_category="Preferences",
    time="Present",
    referent="Self",
    duration=["Long-term"],
    context_sufficient="Yes",
    broken="No",
)
result = canonicalize(raw)
print("   'I love Italian food.' ->", result.labels.as_dict())

print("\n--- a broken fact: reason renamed to the canonical label ---")
raw = RawAnnotation(broken="Yes", broken_reason="Not about self/known people")
result = canonicalize(raw)
print("  'Speaker 1 does airplane work.' -> validity:", result.labels.validity,
      "| reason:", result.labels.invalidity_reason)

print("\n--- context insufficiency folds into the invalidity taxonomy ---")
raw = RawAnnotation(
    main_category="Experience",
    time="Past",
    referent="Self",
    duration=["Long-term"],
    context_sufficient="No",
    broken="No",
)
result = canonicalize(raw)
print("  'I've never read that book.' -> reason:", result.labels.invalidity_reason)

print("\n--- followup=No is folded into Maybe ---")
raw = RawAnnotation(
    main_category="Goals and plans",
    time="Future",
    referent="Self",
    duration=["Short-term"],
    context_sufficient="Yes",
    broken="No",
    followup="No",
)
print("  followup:", canonicalize(raw).labels.followup)

print("\n--- both durations: ambiguous, flagged for exclusion ---")
raw = RawAnnotation(
    main_category="Routine activities",
    time="Present",
    referent="Self",
    duration=["Short-term", "Long-term"],
    context_sufficient="Yes",
    broken="No",
)
result = canonicalize(raw)
print("  excluded:", result.excluded, "| reason:", result.exclusion_reason)

print("\n--- validation lists violations as data, not exceptions ---")
from factkit import LabelSet

inconsistent = LabelSet(
    main_category="Preferences",
    time="Present",
    referent="Self",
    duration="Long-term",
    validity="Valid",
    invalidity_reason="Opinion",
)
print("  violations:", validate_labelset(inconsistent))
