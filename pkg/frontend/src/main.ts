import { ApiClient } from "./api";
import { AnnotatorApp } from "./app";
import { renderConfigError } from "./view";

// Configuration comes from the query string only:
//   ?campaign=<id>&annotator=<id>[&server=<base-url>]
// With no server parameter the page assumes it is served next to the API.

export function boot(root: HTMLElement, search: string): AnnotatorApp | null {
  const params = new URLSearchParams(search);
  const campaignId = params.get("campaign");
  const annotatorId = params.get("annotator");
  if (!campaignId || !annotatorId) {
    renderConfigError(
      root,
      "الرابط غير مكتمل: يلزم تحديد campaign و annotator في عنوان الصفحة.",
    );
    return null;
  }
  const baseUrl = params.get("server") ?? "";
  const client = new ApiClient(baseUrl, (input, init) => fetch(input, init));
  const app = new AnnotatorApp(root, client, { campaignId, annotatorId });
  void app.start();
  return app;
}

const root = document.getElementById("app");
if (root) {
  boot(root, window.location.search);
}
