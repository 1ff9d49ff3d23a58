"""Monte-Carlo coverage studies: data-generating models, reference targets and the replication harness."""
