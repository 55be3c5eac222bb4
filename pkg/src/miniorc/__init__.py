"""miniorc: a simulated PaaS orchestration stack.

Deployments are described in a TOSCA YAML subset, matchmade against
simulated IaaS sites using monitoring, broker rules, SLA constraints and
data locality, and executed either as provisioned virtual infrastructure
or as managed services/jobs on an elastic, fairness-scheduled cluster.
"""

__version__ = "0.1.0"
