"""Distributed mining of quantitative amino-acid association rules.

Worker sites hold partitions of a protein data bank and run a fixed
pipeline of dispatchable agents (filter, frequency count, discretize,
mine, collect, receive-global); a central coordinator launches agent
clones over TCP, gathers their result briefcases, and integrates the
per-site knowledge into globally strong association rules.

Modules
-------
protein_bank   FASTA parsing, length filtering, site splitting
discretizer    amino-acid frequencies, 15-partition item mapping
miner          Apriori frequent-itemset mining (exact thresholds)
rulegen        strong-rule generation with exact support/confidence
knowledge      local/global knowledge bases and their integration
protocol       length-prefixed wire format for agent profiles
worker         agent execution service and the six agent behaviours
coordinator    launcher, result manager, global integration driver
cli            operator entry points (``aeqarm`` command)
"""

__version__ = "0.1.0"
