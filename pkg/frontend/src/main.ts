/** Entry point: mount the review app against the configured service URL. */

import { FeedbackApi } from "./api.js";
import { ReviewApp } from "./app.js";

function serviceBaseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  if (fromQuery) return fromQuery;
  // same host as the page, default service port
  return `${window.location.protocol}//${window.location.hostname}:8000`;
}

const root = document.getElementById("app");
if (root) {
  const app = new ReviewApp(root, new FeedbackApi(serviceBaseUrl()));
  void app.start();
}
