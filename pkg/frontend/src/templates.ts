/**
 * Starter templates for the composer. Templates travel to the gateway as
 * raw text; edit freely before submitting.
 */

export interface CatalogEntry {
  name: string;
  summary: string;
  text: string;
}

export const TEMPLATE_CATALOG: CatalogEntry[] = [
  {
    name: "Replicated web service",
    summary: "Managed service on the elastic cluster, two replicas.",
    text: `tosca_definitions_version: tosca_simple_yaml_1_0
description: Web portal managed by the platform.
topology_template:
  node_templates:
    vm:
      type: Compute
      properties:
        cpu: 2
        memory: 4
        disk: 20
    web:
      type: LongRunningService
      properties:
        image: web-portal:2.1
        replicas: 2
      requirements:
        - host: vm
  policies:
    - scenario_hint: B
`,
  },
  {
    name: "Virtual infrastructure pair",
    summary: "Two user-managed compute nodes provisioned on one site.",
    text: `tosca_definitions_version: tosca_simple_yaml_1_0
description: Head node plus worker, user managed.
topology_template:
  node_templates:
    head:
      type: tosca.nodes.Compute
      properties:
        cpu: 4
        memory: 8
        disk: 40
    worker:
      type: tosca.nodes.Compute
      properties:
        cpu: 8
        memory: 16
        disk: 80
      requirements:
        - dependency: head
`,
  },
  {
    name: "Batch job near its data",
    summary: "Batch analysis colocated with a named dataset.",
    text: `tosca_definitions_version: tosca_simple_yaml_1_0
description: Batch analysis pinned near its input dataset.
topology_template:
  node_templates:
    wn:
      type: tosca.nodes.Compute
      properties:
        cpu: 2
        memory: 4
        disk: 20
    crunch:
      type: tosca.nodes.BatchJob
      properties:
        image: sim-runner:2.0
        command: run --all
        duration: 120
        max_attempts: 3
      requirements:
        - host: wn
        - data: input_data
    input_data:
      type: DataRequirement
      properties:
        dataset: ds-0001
        access_mode: posix
  policies:
    - scenario_hint: B
`,
  },
];
