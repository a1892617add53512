import type { Schema } from "./types.js";

export interface FormSubmit {
  features: number[];
  k: number;
}

/**
 * Patient feature form sized from the served schema, so the same client
 * works against deployments with different feature dimensions.  The
 * submit button stays disabled until every field parses to a finite
 * number and k is within 1..k_max.
 */
export class PatientForm {
  readonly element: HTMLFormElement;
  private readonly inputs: HTMLInputElement[] = [];
  private readonly kInput: HTMLInputElement;
  private readonly submitButton: HTMLButtonElement;

  constructor(
    doc: Document,
    schema: Schema,
    onSubmit: (data: FormSubmit) => void,
  ) {
    this.element = doc.createElement("form");
    this.element.className = "patient-form";

    for (let i = 0; i < schema.feature_dim; i++) {
      const input = doc.createElement("input");
      input.type = "text";
      input.name = `feature-${i}`;
      input.placeholder = `feature ${i}`;
      input.addEventListener("input", () => this.refresh());
      this.inputs.push(input);
      this.element.appendChild(input);
    }

    this.kInput = doc.createElement("input");
    this.kInput.type = "text";
    this.kInput.name = "k";
    this.kInput.value = "4";
    this.kInput.setAttribute("data-max", String(schema.k_max));
    this.kInput.addEventListener("input", () => this.refresh());
    this.element.appendChild(this.kInput);

    this.submitButton = doc.createElement("button");
    this.submitButton.type = "submit";
    this.submitButton.textContent = "Suggest";
    this.element.appendChild(this.submitButton);

    this.element.addEventListener("submit", (ev) => {
      ev.preventDefault();
      if (!this.valid()) return;
      onSubmit({ features: this.features(), k: this.k() });
    });
    this.refresh();
  }

  private features(): number[] {
    return this.inputs.map((i) => Number(i.value));
  }

  private k(): number {
    return Number(this.kInput.value);
  }

  valid(): boolean {
    const featuresOk = this.inputs.every(
      (i) => i.value.trim() !== "" && Number.isFinite(Number(i.value)),
    );
    const kMax = Number(this.kInput.getAttribute("data-max"));
    const k = this.k();
    return featuresOk && Number.isInteger(k) && k >= 1 && k <= kMax;
  }

  refresh(): void {
    this.submitButton.disabled = !this.valid();
  }

  setValues(features: number[], k?: number): void {
    features.forEach((v, i) => {
      const input = this.inputs[i];
      if (input) input.value = String(v);
    });
    if (k !== undefined) this.kInput.value = String(k);
    this.refresh();
  }
}
